use nalgebra::dmatrix;

use crate::numkernel::Mat;
use crate::region::RegionSpec;

/// A 5×5 nonnegative matrix with spectral radius about 2.4, and two
/// published Schur-stable approximations of it.
#[derive(Debug, Clone)]
pub struct DiscreteExample {
    pub a: Mat,
    /// Nonnegative stable approximation.
    pub a_plus: Mat,
    /// Best previously reported stable approximation.
    pub a_b: Mat,
    pub published_rho: f64,
    pub published_error_plus: f64,
    pub published_error_b: f64,
    /// Published errors of this method from identity and LMI starts.
    pub published_error_identity: f64,
    pub published_error_lmi: f64,
}

impl DiscreteExample {
    pub fn region(&self) -> RegionSpec {
        RegionSpec::discrete_stable()
    }
}

pub fn discrete_example() -> DiscreteExample {
    let a = dmatrix![
        0.7, 0.2, 0.1, 0.5, 1.0;
        0.3, 0.6, 0.2, 0.8, 0.3;
        0.5, 0.7, 0.9, 1.0, 0.5;
        0.1, 0.1, 0.3, 0.8, 0.3;
        0.8, 0.2, 0.9, 0.3, 0.2
    ];
    let a_plus = dmatrix![
        0.3796, 0.1797, 0.0, 0.5, 0.7343;
        0.0, 0.5791, 0.0069, 0.8, 0.0274;
        0.0580, 0.6719, 0.6403, 1.0, 0.1334;
        0.0, 0.0, 0.0, 0.8, 0.0;
        0.4204, 0.1759, 0.6770, 0.3, 0.0
    ];
    let a_b = dmatrix![
        0.5999, 0.1317, -0.0882, 0.5337, 0.8834;
        0.2582, 0.5864, 0.0967, 0.8512, 0.2089;
        0.4469, 0.6904, 0.8242, 1.0419, 0.4257;
        -0.0828, -0.1243, -0.2132, 0.8209, 0.0595;
        0.7076, 0.1273, 0.7126, 0.3255, 0.0923
    ];
    DiscreteExample {
        a,
        a_plus,
        a_b,
        published_rho: 2.4,
        published_error_plus: 1.10,
        published_error_b: 0.76,
        published_error_identity: 0.90,
        published_error_lmi: 1.40,
    }
}
