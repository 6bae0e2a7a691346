//! Canonical layer tables for every network in the pipeline.
//!
//! The 2D tables follow the published Morpho-MNIST architectures; the 3D
//! tables follow the brain-MRI ones with the obvious shape typos repaired so
//! the rows chain (channel counts are kept verbatim, strides/paddings are
//! adjusted only where the printed output sizes force it). Slim 3D variants
//! back the end-to-end 3D smoke runs at single-core-CPU cost.

use crate::nn::{Activation, LayerSpec, NetworkSpec, Norm};

/// 2D image transformer: UNet-style encoder/decoder with additive skip
/// connections between equal-shape stages, tanh output.
pub fn itn_2d_spec() -> NetworkSpec {
    NetworkSpec {
        name: "itn_2d".into(),
        dim: 2,
        input_shape: vec![1, 28, 28],
        layers: vec![
            LayerSpec::conv(16, 3, 1, 1).norm(Norm::Batch).act(Activation::Relu), // [16,28,28]
            LayerSpec::conv(32, 3, 2, 1).norm(Norm::Batch).act(Activation::Relu), // [32,14,14]
            LayerSpec::conv(64, 3, 2, 1).norm(Norm::Batch).act(Activation::Relu), // [64,7,7]
            LayerSpec::conv(128, 3, 1, 1).norm(Norm::Batch).act(Activation::Relu), // [128,7,7]
            LayerSpec::conv(64, 3, 1, 1).norm(Norm::Batch).act(Activation::Relu), // [64,7,7]
            LayerSpec::upsample_conv(32, 3, 1).norm(Norm::Batch).act(Activation::Relu), // [32,14,14]
            LayerSpec::upsample_conv(16, 3, 1).norm(Norm::Batch).act(Activation::Relu), // [16,28,28]
            // printed as an `up` row but with unchanged 28x28 extent: a plain conv
            LayerSpec::conv(1, 3, 1, 1).act(Activation::Tanh), // [1,28,28]
        ],
        skips: vec![(2, 4), (1, 5), (0, 6)],
    }
}

/// 2D discriminator: conv pyramid with instance norm, dropout and a sigmoid
/// scalar output.
pub fn discriminator_2d_spec() -> NetworkSpec {
    NetworkSpec {
        name: "discriminator_2d".into(),
        dim: 2,
        input_shape: vec![1, 28, 28],
        layers: vec![
            LayerSpec::conv(32, 3, 1, 1).act(Activation::Relu), // [32,28,28]
            LayerSpec::conv(64, 3, 2, 1).norm(Norm::Instance).act(Activation::Relu), // [64,14,14]
            LayerSpec::conv(128, 3, 2, 1).norm(Norm::Instance).act(Activation::Relu), // [128,7,7]
            LayerSpec::conv(256, 3, 2, 1)
                .norm(Norm::Instance)
                .dropout(0.5)
                .act(Activation::Relu), // [256,4,4]
            LayerSpec::conv(1, 3, 2, 0).act(Activation::Sigmoid), // [1,1,1]
        ],
        skips: vec![],
    }
}

/// 2D 3-class classifier; emits raw logits (cross-entropy applies softmax).
pub fn classifier_2d_spec() -> NetworkSpec {
    NetworkSpec {
        name: "classifier_2d".into(),
        dim: 2,
        input_shape: vec![1, 28, 28],
        layers: vec![
            LayerSpec::conv(16, 3, 2, 1).act(Activation::Relu), // [16,14,14]
            LayerSpec::conv(32, 3, 2, 1).norm(Norm::Batch).act(Activation::Relu), // [32,7,7]
            LayerSpec::conv(64, 3, 2, 1).norm(Norm::Batch).act(Activation::Relu), // [64,4,4]
            LayerSpec::conv(128, 3, 2, 0)
                .norm(Norm::Batch)
                .dropout(0.5)
                .act(Activation::Relu), // [128,1,1]
            LayerSpec::conv(3, 3, 1, 1), // [3,1,1] logits
        ],
        skips: vec![],
    }
}

/// 3D image transformer (64^3), encoder/decoder with additive skips.
pub fn itn_3d_spec() -> NetworkSpec {
    NetworkSpec {
        name: "itn_3d".into(),
        dim: 3,
        input_shape: vec![1, 64, 64, 64],
        layers: vec![
            LayerSpec::conv(8, 3, 1, 1).norm(Norm::Batch).act(Activation::Relu), // [8,64^3]
            LayerSpec::conv(16, 3, 2, 1).norm(Norm::Batch).act(Activation::Relu), // [16,32^3]
            LayerSpec::conv(32, 3, 2, 1).norm(Norm::Batch).act(Activation::Relu), // [32,16^3]
            LayerSpec::conv(64, 3, 2, 1).norm(Norm::Batch).act(Activation::Relu), // [64,8^3]
            LayerSpec::conv(64, 3, 1, 1).norm(Norm::Batch).act(Activation::Relu), // [64,8^3]
            LayerSpec::conv(64, 3, 1, 1).norm(Norm::Batch).act(Activation::Relu), // [64,8^3]
            LayerSpec::upsample_conv(32, 3, 1)
                .norm(Norm::Batch)
                .dropout(0.5)
                .act(Activation::Relu), // [32,16^3]
            LayerSpec::upsample_conv(16, 3, 1)
                .norm(Norm::Batch)
                .dropout(0.5)
                .act(Activation::Relu), // [16,32^3]
            LayerSpec::upsample_conv(8, 3, 1)
                .norm(Norm::Batch)
                .dropout(0.5)
                .act(Activation::Relu), // [8,64^3]
            LayerSpec::conv(1, 3, 1, 1).act(Activation::Tanh), // [1,64^3]
        ],
        skips: vec![(3, 5), (2, 6), (1, 7), (0, 8)],
    }
}

/// 3D discriminator.
pub fn discriminator_3d_spec() -> NetworkSpec {
    NetworkSpec {
        name: "discriminator_3d".into(),
        dim: 3,
        input_shape: vec![1, 64, 64, 64],
        layers: vec![
            LayerSpec::conv(32, 3, 1, 1).act(Activation::Relu), // [32,64^3]
            LayerSpec::conv(64, 3, 2, 1).norm(Norm::Instance).act(Activation::Relu), // [64,32^3]
            LayerSpec::conv(128, 3, 2, 1).norm(Norm::Instance).act(Activation::Relu), // [128,16^3]
            LayerSpec::conv(256, 3, 2, 1).norm(Norm::Instance).act(Activation::Relu), // [256,8^3]
            LayerSpec::conv(256, 3, 2, 1)
                .norm(Norm::Instance)
                .dropout(0.5)
                .act(Activation::Relu), // [256,4^3]
            LayerSpec::conv(1, 3, 2, 0).act(Activation::Sigmoid), // [1,1^3]
        ],
        skips: vec![],
    }
}

/// 3D sex classifier: stride-2 pyramid 64^3 -> 1 with the tabulated channel
/// progression, sigmoid scalar output.
pub fn sex_classifier_3d_spec() -> NetworkSpec {
    NetworkSpec {
        name: "sex_classifier_3d".into(),
        dim: 3,
        input_shape: vec![1, 64, 64, 64],
        layers: vec![
            LayerSpec::conv(8, 5, 2, 2).act(Activation::Relu), // [8,32^3]
            LayerSpec::conv(16, 5, 2, 2).norm(Norm::Batch).act(Activation::Relu), // [16,16^3]
            LayerSpec::conv(32, 5, 2, 2).norm(Norm::Batch).act(Activation::Relu), // [32,8^3]
            LayerSpec::conv(64, 5, 2, 2)
                .norm(Norm::Batch)
                .dropout(0.5)
                .act(Activation::Relu), // [64,4^3]
            LayerSpec::conv(128, 2, 2, 0)
                .norm(Norm::Batch)
                .dropout(0.5)
                .act(Activation::Relu), // [128,2^3]
            LayerSpec::conv(128, 2, 2, 0)
                .norm(Norm::Batch)
                .dropout(0.5)
                .act(Activation::Relu), // [128,1^3]
            LayerSpec::conv(1, 5, 1, 2).act(Activation::Sigmoid), // [1,1^3]
        ],
        skips: vec![],
    }
}

/// 3D age regressor: two conv+pool stages then the 128-64-32-1 linear stack.
pub fn age_regressor_3d_spec() -> NetworkSpec {
    NetworkSpec {
        name: "age_regressor_3d".into(),
        dim: 3,
        input_shape: vec![1, 64, 64, 64],
        layers: vec![
            LayerSpec::conv(16, 3, 1, 1).act(Activation::Relu), // [16,64^3]
            LayerSpec::maxpool(3, 2, 1),                        // [16,32^3]
            LayerSpec::conv(32, 3, 2, 1).act(Activation::Relu), // [32,16^3]
            LayerSpec::maxpool(3, 2, 1),                        // [32,8^3]
            LayerSpec::linear(128).act(Activation::Relu),
            LayerSpec::linear(64).act(Activation::Relu),
            LayerSpec::linear(32).act(Activation::Relu),
            LayerSpec::linear(1),
        ],
        skips: vec![],
    }
}

/// Narrow 3D ITN used by the synthetic-blob smoke adaptation; same machinery
/// and skip structure as the full table at a fraction of the FLOPs.
pub fn itn_3d_slim_spec() -> NetworkSpec {
    NetworkSpec {
        name: "itn_3d_slim".into(),
        dim: 3,
        input_shape: vec![1, 64, 64, 64],
        layers: vec![
            LayerSpec::conv(4, 3, 1, 1).norm(Norm::Batch).act(Activation::Relu), // [4,64^3]
            LayerSpec::conv(8, 3, 2, 1).norm(Norm::Batch).act(Activation::Relu), // [8,32^3]
            LayerSpec::conv(16, 3, 2, 1).norm(Norm::Batch).act(Activation::Relu), // [16,16^3]
            LayerSpec::conv(16, 3, 1, 1).norm(Norm::Batch).act(Activation::Relu), // [16,16^3]
            LayerSpec::upsample_conv(8, 3, 1).norm(Norm::Batch).act(Activation::Relu), // [8,32^3]
            LayerSpec::upsample_conv(4, 3, 1).norm(Norm::Batch).act(Activation::Relu), // [4,64^3]
            LayerSpec::conv(1, 3, 1, 1).act(Activation::Tanh), // [1,64^3]
        ],
        skips: vec![(2, 3), (1, 4), (0, 5)],
    }
}

/// Narrow 3D discriminator for the smoke adaptation.
pub fn discriminator_3d_slim_spec() -> NetworkSpec {
    NetworkSpec {
        name: "discriminator_3d_slim".into(),
        dim: 3,
        input_shape: vec![1, 64, 64, 64],
        layers: vec![
            LayerSpec::conv(8, 3, 2, 1).act(Activation::Relu), // [8,32^3]
            LayerSpec::conv(16, 3, 2, 1).norm(Norm::Instance).act(Activation::Relu), // [16,16^3]
            LayerSpec::conv(32, 3, 2, 1)
                .norm(Norm::Instance)
                .dropout(0.5)
                .act(Activation::Relu), // [32,8^3]
            LayerSpec::conv(32, 3, 2, 1).norm(Norm::Instance).act(Activation::Relu), // [32,4^3]
            LayerSpec::conv(1, 3, 2, 0).act(Activation::Sigmoid), // [1,1^3]
        ],
        skips: vec![],
    }
}

/// Narrow binary 3D classifier for the smoke adaptation (sigmoid scalar).
pub fn blob_classifier_3d_spec() -> NetworkSpec {
    NetworkSpec {
        name: "blob_classifier_3d".into(),
        dim: 3,
        input_shape: vec![1, 64, 64, 64],
        layers: vec![
            LayerSpec::conv(8, 3, 2, 1).act(Activation::Relu), // [8,32^3]
            LayerSpec::conv(16, 3, 2, 1).norm(Norm::Batch).act(Activation::Relu), // [16,16^3]
            LayerSpec::conv(32, 3, 2, 1).norm(Norm::Batch).act(Activation::Relu), // [32,8^3]
            LayerSpec::conv(32, 3, 2, 1).norm(Norm::Batch).act(Activation::Relu), // [32,4^3]
            LayerSpec::conv(1, 3, 2, 0).act(Activation::Sigmoid), // [1,1^3]
        ],
        skips: vec![],
    }
}

/// Discriminator trunk (all but the final conv) reused by STN regressors.
pub fn stn_trunk_spec(dim: usize, slim: bool) -> NetworkSpec {
    let mut spec = match (dim, slim) {
        (2, _) => discriminator_2d_spec(),
        (3, false) => discriminator_3d_spec(),
        (3, true) => discriminator_3d_slim_spec(),
        _ => unreachable!("dim checked by caller"),
    };
    spec.name = format!("stn_trunk_{dim}d{}", if slim { "_slim" } else { "" });
    spec.layers.pop();
    spec
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_tables_validate() {
        for spec in [
            itn_2d_spec(),
            discriminator_2d_spec(),
            classifier_2d_spec(),
            itn_3d_spec(),
            discriminator_3d_spec(),
            sex_classifier_3d_spec(),
            age_regressor_3d_spec(),
            itn_3d_slim_spec(),
            discriminator_3d_slim_spec(),
            blob_classifier_3d_spec(),
            stn_trunk_spec(2, false),
            stn_trunk_spec(3, false),
            stn_trunk_spec(3, true),
        ] {
            spec.validate().unwrap_or_else(|e| panic!("{}: {e}", spec.name));
        }
    }

    #[test]
    fn itn_2d_trace_matches_published_table() {
        let trace = itn_2d_spec().shape_trace().unwrap();
        assert_eq!(
            trace,
            vec![
                vec![16, 28, 28],
                vec![32, 14, 14],
                vec![64, 7, 7],
                vec![128, 7, 7],
                vec![64, 7, 7],
                vec![32, 14, 14],
                vec![16, 28, 28],
                vec![1, 28, 28],
            ]
        );
    }

    #[test]
    fn discriminator_2d_trace_matches_published_table() {
        let trace = discriminator_2d_spec().shape_trace().unwrap();
        assert_eq!(
            trace,
            vec![
                vec![32, 28, 28],
                vec![64, 14, 14],
                vec![128, 7, 7],
                vec![256, 4, 4],
                vec![1, 1, 1],
            ]
        );
    }

    #[test]
    fn classifier_2d_trace_chains_to_three_logits() {
        let trace = classifier_2d_spec().shape_trace().unwrap();
        assert_eq!(trace.last().unwrap(), &vec![3, 1, 1]);
    }
}
