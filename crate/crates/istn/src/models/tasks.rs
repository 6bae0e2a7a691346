use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Network;
use crate::scalar::Scalar;

use super::tables;

/// Downstream prediction tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// 2D healthy/fractured/swollen classification (3 logits).
    Digit3Class,
    /// 3D binary classification (sigmoid scalar).
    Sex,
    /// 3D age regression (linear scalar).
    Age,
    /// Narrow 3D binary classifier for the synthetic-blob smoke runs.
    Blob,
}

impl std::str::FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "digit3class" => Ok(TaskKind::Digit3Class),
            "sex" => Ok(TaskKind::Sex),
            "age" => Ok(TaskKind::Age),
            "blob" => Ok(TaskKind::Blob),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

impl TaskKind {
    pub fn dim(self) -> usize {
        match self {
            TaskKind::Digit3Class => 2,
            _ => 3,
        }
    }

    pub fn num_classes(self) -> Option<usize> {
        match self {
            TaskKind::Digit3Class => Some(3),
            TaskKind::Sex | TaskKind::Blob => Some(2),
            TaskKind::Age => None,
        }
    }
}

pub fn build_task_model<T: Scalar>(task: TaskKind, rng: &mut ChaCha8Rng) -> Result<Network<T>> {
    let spec = match task {
        TaskKind::Digit3Class => tables::classifier_2d_spec(),
        TaskKind::Sex => tables::sex_classifier_3d_spec(),
        TaskKind::Age => tables::age_regressor_3d_spec(),
        TaskKind::Blob => tables::blob_classifier_3d_spec(),
    };
    Network::build(spec, rng)
}

pub fn build_itn<T: Scalar>(dim: usize, rng: &mut ChaCha8Rng) -> Result<Network<T>> {
    let spec = match dim {
        2 => tables::itn_2d_spec(),
        3 => tables::itn_3d_spec(),
        other => return Err(Error::Config(format!("itn supports 2D/3D, got {other}"))),
    };
    Network::build(spec, rng)
}

pub fn build_discriminator<T: Scalar>(dim: usize, rng: &mut ChaCha8Rng) -> Result<Network<T>> {
    let spec = match dim {
        2 => tables::discriminator_2d_spec(),
        3 => tables::discriminator_3d_spec(),
        other => {
            return Err(Error::Config(format!(
                "discriminator supports 2D/3D, got {other}"
            )))
        }
    };
    Network::build(spec, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::{RngExt, SeedableRng};

    #[test]
    fn unknown_dim_is_config_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            build_itn::<f32>(4, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn discriminator_output_is_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut d = build_discriminator::<f32>(2, &mut rng).unwrap();
        let mut x = Tensor::zeros(&[4, 1, 28, 28]);
        let mut dr = ChaCha8Rng::seed_from_u64(2);
        for v in x.data_mut() {
            *v = dr.random_range(-1.0f32..1.0);
        }
        let y = d.forward(&x, true, &mut rng);
        assert_eq!(y.shape(), &[4, 1, 1, 1]);
        for v in y.data() {
            assert!(*v > 0.0 && *v < 1.0);
        }
    }

    #[test]
    fn itn_output_is_within_tanh_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut itn = build_itn::<f32>(2, &mut rng).unwrap();
        let mut x = Tensor::zeros(&[2, 1, 28, 28]);
        let mut dr = ChaCha8Rng::seed_from_u64(4);
        for v in x.data_mut() {
            *v = dr.random_range(-1.0f32..1.0);
        }
        let y = itn.forward(&x, true, &mut rng);
        assert_eq!(y.shape(), &[2, 1, 28, 28]);
        for v in y.data() {
            assert!(v.abs() < 1.0);
        }
    }

    #[test]
    fn classifier_emits_three_finite_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut c = build_task_model::<f32>(TaskKind::Digit3Class, &mut rng).unwrap();
        let x = Tensor::zeros(&[2, 1, 28, 28]);
        let y = c.forward(&x, false, &mut rng);
        assert_eq!(y.shape(), &[2, 3, 1, 1]);
        assert!(y.is_finite());
    }
}
