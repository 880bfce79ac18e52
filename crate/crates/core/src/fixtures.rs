//! Small hand-checkable signal matrices with known structure.

/// Three views on five samples with one joint direction, two pairwise
/// shared directions and two individual directions.
pub mod example1 {
    use crate::linalg::Matrix;
    use nalgebra::dmatrix;

    pub fn signals() -> Vec<Matrix> {
        vec![
            dmatrix![
                1.0, 1.0, 1.0;
                -1.0, 1.0, 0.0;
                1.0, 0.0, -1.0;
                -1.0, 0.0, 0.0;
                1.0, 0.0, 0.0
            ],
            dmatrix![
                1.0, 1.0, 0.0;
                -1.0, 1.0, 0.0;
                1.0, 0.0, 1.0;
                -1.0, 0.0, 0.0;
                1.0, 0.0, -1.0
            ],
            dmatrix![
                1.0, 1.0, 0.0;
                -1.0, 0.0, -1.0;
                1.0, -1.0, 0.0;
                -1.0, 0.0, 2.0;
                1.0, 0.0, 1.0
            ],
        ]
    }

    pub fn joint() -> Vec<f64> {
        vec![1.0, -1.0, 1.0, -1.0, 1.0]
    }

    pub fn shared_12() -> Vec<f64> {
        vec![1.0, 1.0, 0.0, 0.0, 0.0]
    }

    pub fn shared_13() -> Vec<f64> {
        vec![1.0, 0.0, -1.0, 0.0, 0.0]
    }

    pub fn individual_2() -> Vec<f64> {
        vec![0.0, 0.0, 1.0, 0.0, -1.0]
    }

    pub fn individual_3() -> Vec<f64> {
        vec![0.0, -1.0, 0.0, 2.0, 1.0]
    }
}

/// Two views on three samples with one joint and one individual direction
/// per view.
pub mod example2 {
    use crate::linalg::Matrix;
    use nalgebra::dmatrix;

    pub fn signals() -> Vec<Matrix> {
        vec![
            dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.0],
            dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 1.0],
        ]
    }

    pub fn joint() -> Vec<f64> {
        vec![1.0, 0.0, 0.0]
    }

    pub fn individual_1() -> Vec<f64> {
        vec![0.0, 1.0, 0.0]
    }

    pub fn individual_2() -> Vec<f64> {
        vec![0.0, 1.0, 1.0]
    }
}
