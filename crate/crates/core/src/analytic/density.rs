use std::fmt;
use std::sync::Arc;

use crate::quad::{integrate_with_breaks, Tolerance};

type Pdf = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Partial probability density over capacitor charge.
///
/// Point masses are kept symbolic. A `Continuous` density is zero outside
/// its support.
#[derive(Clone)]
pub enum Density1D {
    Delta { location: f64, weight: f64 },
    Continuous { pdf: Pdf, support: (f64, f64) },
    Mixture(Vec<Density1D>),
}

impl Density1D {
    pub fn delta(location: f64, weight: f64) -> Self {
        Density1D::Delta { location, weight }
    }

    /// Unit mass spread evenly over `(lo, hi)`.
    pub fn uniform(lo: f64, hi: f64) -> Self {
        assert!(hi > lo, "uniform density needs hi > lo");
        let h = 1.0 / (hi - lo);
        Density1D::Continuous {
            pdf: Arc::new(move |q| if q > lo && q < hi { h } else { 0.0 }),
            support: (lo, hi),
        }
    }

    pub fn from_fn<F>(lo: f64, hi: f64, pdf: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Density1D::Continuous {
            pdf: Arc::new(pdf),
            support: (lo, hi),
        }
    }

    pub fn zero() -> Self {
        Density1D::Mixture(Vec::new())
    }

    pub fn is_delta(&self) -> bool {
        matches!(self, Density1D::Delta { .. })
    }

    /// Value of the regular part at `q`; point masses contribute nothing.
    pub fn eval(&self, q: f64) -> f64 {
        match self {
            Density1D::Delta { .. } => 0.0,
            Density1D::Continuous { pdf, support } => {
                if q < support.0 || q > support.1 {
                    0.0
                } else {
                    pdf(q)
                }
            }
            Density1D::Mixture(parts) => parts.iter().map(|p| p.eval(q)).sum(),
        }
    }

    /// Smallest interval holding all mass; `None` for the zero density.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            Density1D::Delta { location, .. } => Some((*location, *location)),
            Density1D::Continuous { support, .. } => Some(*support),
            Density1D::Mixture(parts) => parts
                .iter()
                .filter_map(|p| p.support())
                .reduce(|(a, b), (c, d)| (a.min(c), b.max(d))),
        }
    }

    /// Total mass, by quadrature for continuous parts.
    pub fn mass(&self) -> f64 {
        self.mass_between(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Mass in `[lo, hi]`. Point masses on a boundary count fully.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Density1D::Delta { location, weight } => {
                if *location >= lo && *location <= hi {
                    *weight
                } else {
                    0.0
                }
            }
            Density1D::Continuous { pdf, support } => {
                let a = lo.max(support.0);
                let b = hi.min(support.1);
                if b <= a {
                    return 0.0;
                }
                let mut f = |q: f64| pdf(q);
                integrate_with_breaks(
                    &mut f,
                    a,
                    b,
                    &[],
                    Tolerance::relative(1e-10).with_abs(1e-14),
                )
                .value
            }
            Density1D::Mixture(parts) => parts.iter().map(|p| p.mass_between(lo, hi)).sum(),
        }
    }

    /// Sum of point-mass weights.
    pub fn singular_mass(&self) -> f64 {
        match self {
            Density1D::Delta { weight, .. } => *weight,
            Density1D::Continuous { .. } => 0.0,
            Density1D::Mixture(parts) => parts.iter().map(|p| p.singular_mass()).sum(),
        }
    }

    /// Pushes the density forward through an increasing affine map
    /// `q -> scale * q + offset`, preserving every part's mass.
    pub fn push_affine(&self, scale: f64, offset: f64) -> Self {
        debug_assert!(scale > 0.0);
        match self {
            Density1D::Delta { location, weight } => Density1D::Delta {
                location: scale * location + offset,
                weight: *weight,
            },
            Density1D::Continuous { pdf, support } => {
                let lo = scale * support.0 + offset;
                let hi = scale * support.1 + offset;
                if scale == 0.0 || !(hi > lo) {
                    // collapsed below floating-point resolution
                    let weight = self.mass();
                    return Density1D::Delta {
                        location: 0.5 * (lo + hi),
                        weight,
                    };
                }
                let pdf = pdf.clone();
                let inv = 1.0 / scale;
                Density1D::Continuous {
                    pdf: Arc::new(move |q| inv * pdf((q - offset) * inv)),
                    support: (lo, hi),
                }
            }
            Density1D::Mixture(parts) => {
                Density1D::Mixture(parts.iter().map(|p| p.push_affine(scale, offset)).collect())
            }
        }
    }
}

impl fmt::Debug for Density1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density1D::Delta { location, weight } => f
                .debug_struct("Delta")
                .field("location", location)
                .field("weight", weight)
                .finish(),
            Density1D::Continuous { support, .. } => f
                .debug_struct("Continuous")
                .field("support", support)
                .finish_non_exhaustive(),
            Density1D::Mixture(parts) => f.debug_tuple("Mixture").field(parts).finish(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_mass_and_push() {
        let u = Density1D::uniform(1.0, 3.0);
        assert!((u.mass() - 1.0).abs() < 1e-12);
        assert!((u.mass_between(0.0, 2.0) - 0.5).abs() < 1e-12);
        let p = u.push_affine(0.5, 1.0);
        assert_eq!(p.support(), Some((1.5, 2.5)));
        assert!((p.eval(2.0) - 1.0).abs() < 1e-15);
        assert!((p.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_sums_parts() {
        let m = Density1D::Mixture(vec![
            Density1D::delta(0.5, 0.25),
            Density1D::from_fn(0.0, 1.0, |_| 0.75),
        ]);
        assert!((m.mass() - 1.0).abs() < 1e-12);
        assert_eq!(m.singular_mass(), 0.25);
        assert_eq!(m.support(), Some((0.0, 1.0)));
        assert_eq!(Density1D::zero().support(), None);
        assert_eq!(Density1D::zero().mass(), 0.0);
    }

    #[test]
    fn collapsed_push_becomes_delta() {
        let u = Density1D::uniform(0.0, 1.0);
        let p = u.push_affine(1e-320, 2.0);
        assert!(p.is_delta());
        assert!((p.singular_mass() - 1.0).abs() < 1e-12);
    }
}
