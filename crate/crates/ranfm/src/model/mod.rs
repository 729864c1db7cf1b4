//! The patched-transformer model: normalization, tokenization, encoder,
//! and task heads, plus parameter initialization and counting.

pub mod config;
pub mod forward;
pub mod params;
pub mod patching;
pub mod posenc;
pub mod revin;

pub use config::{ModelConfig, Variant};
pub use forward::{
    bind_params, build_classify_head, build_embedding, build_encoder, build_forecast_head,
    build_recon_head, encoder_forward, head_classify, head_forecast, head_reconstruct, mean_pool,
    ParamNodes, TokenLayout, LAYER_NORM_EPS,
};
pub use params::{init_params, param_count, parameter_shapes, HeadSpec, ParameterSet};
pub use patching::{apply_mask, patchify, project_patches, PatchGrid, TokenSequence};
pub use posenc::positional_encode;
pub use revin::{revin_denormalize, revin_normalize, NormStats};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tensor::{DType, Tensor};

/// A configuration plus its parameters and head selection: everything needed
/// to run inference.
#[derive(Debug, Clone)]
pub struct Model {
    pub cfg: ModelConfig,
    pub heads: HeadSpec,
    pub params: ParameterSet,
}

impl Model {
    pub fn init(cfg: ModelConfig, heads: HeadSpec, seed: u64, dtype: DType) -> Result<Model> {
        if let Some(k) = heads.num_classes {
            if k < 2 {
                return Err(Error::Config(format!("need at least 2 classes, got {k}")));
            }
        }
        if heads.forecast_horizon == Some(0) {
            return Err(Error::Config("forecast horizon must be positive".into()));
        }
        let params = init_params(&cfg, &heads, seed, dtype)?;
        Ok(Model { cfg, heads, params })
    }

    pub fn dtype(&self) -> DType {
        self.params.dtype()
    }

    fn encode_window(
        &self,
        window_norm: &Tensor,
        mask: Option<&[usize]>,
    ) -> Result<(Graph, crate::graph::NodeId, TokenLayout)> {
        let mut g = Graph::new();
        let nodes = bind_params(&mut g, &self.params);
        let (tokens, layout) = build_embedding(&mut g, &self.cfg, &nodes, window_norm, mask)?;
        let z = build_encoder(&mut g, &self.cfg, &nodes, tokens)?;
        Ok((g, z, layout))
    }

    /// Reconstruct a normalized window with no masking: C×(N·P), normalized
    /// space. The caller denormalizes with the window's own stats.
    pub fn reconstruct_window(&self, window_norm: &Tensor) -> Result<Tensor> {
        self.reconstruct_with_mask(window_norm, &[])
    }

    /// Reconstruct with the listed token indices replaced by the mask token.
    pub fn reconstruct_with_mask(&self, window_norm: &Tensor, mask: &[usize]) -> Result<Tensor> {
        let mask_opt = if mask.is_empty() { None } else { Some(mask) };
        let mut g = Graph::new();
        let nodes = bind_params(&mut g, &self.params);
        let (tokens, layout) = build_embedding(&mut g, &self.cfg, &nodes, window_norm, mask_opt)?;
        let z = build_encoder(&mut g, &self.cfg, &nodes, tokens)?;
        let out = build_recon_head(&mut g, &self.cfg, &nodes, z, layout)?;
        Ok(g.value(out).clone())
    }

    /// Forecast H normalized values per channel from a normalized window.
    pub fn forecast_window(&self, window_norm: &Tensor) -> Result<Tensor> {
        let horizon = self
            .heads
            .forecast_horizon
            .ok_or_else(|| Error::Config("model has no forecast head".into()))?;
        let mut g = Graph::new();
        let nodes = bind_params(&mut g, &self.params);
        let (tokens, layout) = build_embedding(&mut g, &self.cfg, &nodes, window_norm, None)?;
        let z = build_encoder(&mut g, &self.cfg, &nodes, tokens)?;
        let out = build_forecast_head(&mut g, &self.cfg, &nodes, z, layout)?;
        let value = g.value(out).clone();
        debug_assert_eq!(value.cols(), horizon);
        Ok(value)
    }

    /// Class logits [K] for a normalized window.
    pub fn classify_window(&self, window_norm: &Tensor) -> Result<Tensor> {
        if self.heads.num_classes.is_none() {
            return Err(Error::Config("model has no classification head".into()));
        }
        let mut g = Graph::new();
        let nodes = bind_params(&mut g, &self.params);
        let (tokens, _) = build_embedding(&mut g, &self.cfg, &nodes, window_norm, None)?;
        let z = build_encoder(&mut g, &self.cfg, &nodes, tokens)?;
        let out = build_classify_head(&mut g, &self.cfg, &nodes, z)?;
        let k = g.value(out).numel();
        g.value(out).reshaped(&[k])
    }

    /// Mean-pooled encoder representation [d] of a normalized window.
    pub fn embed_window(&self, window_norm: &Tensor) -> Result<Tensor> {
        let (g, z, _) = self.encode_window(window_norm, None)?;
        let pooled = crate::ops::mean_rows(g.value(z))?;
        pooled.reshaped(&[self.cfg.embed_dim])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::Activation;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            layers: 1,
            embed_dim: 4,
            num_heads: 2,
            ff_dim: 8,
            window_len: 8,
            patch_len: 2,
            head_layers: 1,
            activation: Activation::Relu,
            variant: Variant::Custom,
        }
    }

    fn embed(seq_vals: &[f64], c: usize, n: usize, d: usize) -> TokenSequence {
        TokenSequence {
            embeddings: Tensor::from_f64(&[c * n, d], seq_vals, DType::F64).unwrap(),
            masked: vec![false; c * n],
            channels: c,
            patches_per_channel: n,
        }
    }

    #[test]
    fn zero_layer_encoder_is_final_norm() {
        let mut cfg = tiny_cfg();
        cfg.layers = 0;
        let params = init_params(&cfg, &HeadSpec::none(), 1, DType::F64).unwrap();
        let vals: Vec<f64> = (0..16).map(|i| i as f64 * 0.25 - 2.0).collect();
        let seq = embed(&vals, 1, 4, 4);
        let out = encoder_forward(&seq, &params, &cfg).unwrap();
        let expect = crate::ops::layer_norm(
            &seq.embeddings,
            params.get("final_norm.gain").unwrap(),
            params.get("final_norm.bias").unwrap(),
            LAYER_NORM_EPS,
        )
        .unwrap();
        assert!(out.embeddings.bits_eq(&expect));
    }

    #[test]
    fn encoder_output_finite_at_init_for_scaled_presets() {
        for (l, d, b, ff) in [(2, 8, 2, 16), (2, 12, 4, 24), (3, 16, 4, 32)] {
            let cfg = ModelConfig {
                layers: l,
                embed_dim: d,
                num_heads: b,
                ff_dim: ff,
                window_len: 16,
                patch_len: 4,
                head_layers: 2,
                activation: Activation::Relu,
                variant: Variant::Custom,
            };
            let params = init_params(&cfg, &HeadSpec::none(), 5, DType::F64).unwrap();
            let vals: Vec<f64> = (0..8 * d).map(|i| ((i * 13 % 7) as f64 - 3.0) * 0.5).collect();
            let seq = embed(&vals, 2, 4, d);
            let out = encoder_forward(&seq, &params, &cfg).unwrap();
            assert!(out.embeddings.is_all_finite());
        }
    }

    #[test]
    fn channel_block_swap_commutes_with_encoder() {
        let cfg = tiny_cfg();
        let params = init_params(&cfg, &HeadSpec::none(), 9, DType::F64).unwrap();
        let n = 4;
        let d = 4;
        let vals: Vec<f64> = (0..2 * n * d).map(|i| (i as f64 * 0.37).sin()).collect();
        let seq = embed(&vals, 2, n, d);
        let out = encoder_forward(&seq, &params, &cfg).unwrap();

        // swap the two channel blocks, encode, swap back
        let mut swapped = vals.clone();
        swapped.rotate_left(n * d);
        let seq2 = embed(&swapped, 2, n, d);
        let out2 = encoder_forward(&seq2, &params, &cfg).unwrap();
        let mut back = out2.embeddings.to_f64_vec();
        back.rotate_right(n * d);
        // exact in real arithmetic; summation order differs under the
        // permutation, so compare at f64 roundoff scale
        for (a, b) in out.embeddings.to_f64_vec().iter().zip(&back) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn mean_pool_examples() {
        let seq = embed(&[1.0, 2.0, 1.0, 2.0], 1, 2, 2);
        let z = mean_pool(&seq).unwrap();
        assert_eq!(z.to_f64_vec(), vec![1.0, 2.0]);

        let seq = embed(&[0.0, 2.0, 2.0, 0.0], 1, 2, 2);
        let z = mean_pool(&seq).unwrap();
        assert_eq!(z.to_f64_vec(), vec![1.0, 1.0]);

        // permutation invariance
        let seq_perm = embed(&[2.0, 0.0, 0.0, 2.0], 1, 2, 2);
        assert_eq!(mean_pool(&seq_perm).unwrap().to_f64_vec(), z.to_f64_vec());
    }

    #[test]
    fn recon_head_shape_and_zero_weights() {
        let cfg = tiny_cfg();
        let mut params = init_params(&cfg, &HeadSpec::reconstruction(), 2, DType::F64).unwrap();
        for name in ["head.recon.0.weight", "head.recon.0.bias"] {
            let t = params.get(name).unwrap();
            let zero = Tensor::zeros(t.shape(), t.dtype());
            params.insert(name.into(), zero);
        }
        let seq = embed(&(0..32).map(|v| v as f64).collect::<Vec<_>>(), 2, 4, 4);
        let out = head_reconstruct(&seq, &params, &cfg).unwrap();
        assert_eq!(out.shape(), &[2, 8]);
        assert!(out.to_f64_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recon_head_pseudo_inverse_recovers_patches() {
        // Tokens from a full-row-rank projection W (P=2, d=4) map back
        // through the right pseudo-inverse W⁺ = Wᵀ(WWᵀ)⁻¹.
        let cfg = tiny_cfg();
        let w_vals = [0.9, -0.2, 0.4, 0.1, 0.3, 0.8, -0.5, 0.2];
        let w = Tensor::from_f64(&[2, 4], &w_vals, DType::F64).unwrap();

        let wwt = crate::ops::matmul_nt(&w, &w).unwrap();
        let (a, b, c, d) = (wwt.get(0), wwt.get(1), wwt.get(2), wwt.get(3));
        let det = a * d - b * c;
        let wwt_inv =
            Tensor::from_f64(&[2, 2], &[d / det, -b / det, -c / det, a / det], DType::F64).unwrap();
        let w_pinv = crate::ops::matmul_tn(&w, &wwt_inv).unwrap();

        let x = Tensor::from_f64(
            &[1, 8],
            &[0.5, -1.0, 2.0, 0.25, -0.75, 1.5, 0.0, 1.0],
            DType::F64,
        )
        .unwrap();
        let grid = patchify(&x, 2).unwrap();
        let seq = project_patches(&grid, &w, &Tensor::zeros(&[4], DType::F64)).unwrap();

        let mut params = init_params(&cfg, &HeadSpec::reconstruction(), 3, DType::F64).unwrap();
        params.insert("head.recon.0.weight".into(), w_pinv);
        params.insert("head.recon.0.bias".into(), Tensor::zeros(&[2], DType::F64));
        let out = head_reconstruct(&seq, &params, &cfg).unwrap();
        assert_eq!(out.shape(), &[1, 8]);
        assert!(out.max_abs_diff(&x) < 1e-4, "diff {}", out.max_abs_diff(&x));
    }

    #[test]
    fn forecast_head_shape_and_channel_sharing() {
        let cfg = tiny_cfg();
        let heads = HeadSpec {
            reconstruction: false,
            forecast_horizon: Some(3),
            num_classes: None,
        };
        let params = init_params(&cfg, &heads, 4, DType::F64).unwrap();
        // identical channel contents -> identical forecasts
        let block: Vec<f64> = (0..16).map(|v| (v as f64 * 0.3).cos()).collect();
        let mut vals = block.clone();
        vals.extend_from_slice(&block);
        let seq = embed(&vals, 2, 4, 4);
        let out = head_forecast(&seq, &params, &cfg, 3).unwrap();
        assert_eq!(out.shape(), &[2, 3]);
        for j in 0..3 {
            assert_eq!(out.at(0, j), out.at(1, j));
        }
        assert!(head_forecast(&seq, &params, &cfg, 0).is_err());
    }

    #[test]
    fn zero_forecast_weights_denormalize_to_channel_means() {
        let cfg = tiny_cfg();
        let heads = HeadSpec {
            reconstruction: false,
            forecast_horizon: Some(2),
            num_classes: None,
        };
        let mut params = init_params(&cfg, &heads, 4, DType::F64).unwrap();
        for name in ["head.forecast.0.weight", "head.forecast.0.bias"] {
            let t = params.get(name).unwrap();
            params.insert(name.into(), Tensor::zeros(t.shape(), t.dtype()));
        }
        let seq = embed(&(0..16).map(|v| v as f64).collect::<Vec<_>>(), 1, 4, 4);
        let fc = head_forecast(&seq, &params, &cfg, 2).unwrap();
        assert!(fc.to_f64_vec().iter().all(|&v| v == 0.0));
        let stats = NormStats {
            mean: vec![11.5],
            std: vec![2.0],
            eps: 1e-5,
        };
        let denorm = revin_denormalize(&fc, &stats).unwrap();
        assert!(denorm.to_f64_vec().iter().all(|&v| v == 11.5));
    }

    #[test]
    fn classify_head_identity_map() {
        // d=2, K=2, M=1 with identity weights: logits equal the input.
        let cfg = ModelConfig {
            layers: 1,
            embed_dim: 2,
            num_heads: 1,
            ff_dim: 4,
            window_len: 4,
            patch_len: 2,
            head_layers: 1,
            activation: Activation::Relu,
            variant: Variant::Custom,
        };
        let heads = HeadSpec {
            reconstruction: false,
            forecast_horizon: None,
            num_classes: Some(2),
        };
        let mut params = init_params(&cfg, &heads, 0, DType::F64).unwrap();
        params.insert(
            "head.classify.0.weight".into(),
            Tensor::identity(2, DType::F64),
        );
        params.insert("head.classify.0.bias".into(), Tensor::zeros(&[2], DType::F64));
        let z = Tensor::from_f64(&[2], &[3.0, 1.0], DType::F64).unwrap();
        let logits = head_classify(&z, &params, &cfg).unwrap();
        assert_eq!(logits.to_f64_vec(), vec![3.0, 1.0]);

        // zero weights, bias b -> logits = b regardless of input
        params.insert(
            "head.classify.0.weight".into(),
            Tensor::zeros(&[2, 2], DType::F64),
        );
        params.insert(
            "head.classify.0.bias".into(),
            Tensor::from_f64(&[2], &[0.4, -0.2], DType::F64).unwrap(),
        );
        let other = Tensor::from_f64(&[2], &[-9.0, 5.0], DType::F64).unwrap();
        assert_eq!(
            head_classify(&other, &params, &cfg).unwrap().to_f64_vec(),
            vec![0.4, -0.2]
        );
    }

    #[test]
    fn argmax_invariant_to_constant_logit_shift() {
        let logits = [0.4, 1.7, -0.3];
        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        let shifted: Vec<f64> = logits.iter().map(|v| v + 123.0).collect();
        assert_eq!(argmax(&logits), argmax(&shifted));
    }

    #[test]
    fn model_rejects_degenerate_heads() {
        let cfg = tiny_cfg();
        let heads = HeadSpec {
            reconstruction: false,
            forecast_horizon: None,
            num_classes: Some(1),
        };
        assert!(Model::init(cfg.clone(), heads, 0, DType::F64).is_err());
        let heads = HeadSpec {
            reconstruction: false,
            forecast_horizon: Some(0),
            num_classes: None,
        };
        assert!(Model::init(cfg, heads, 0, DType::F64).is_err());
    }

    #[test]
    fn tiny_encoder_golden_regression() {
        // Frozen output of the first verified run (seed 7, L=1, d=4, B=2);
        // catches any unintended change to the forward computation.
        const GOLDEN: [f64; 16] = [
            0.9964208661299321,
            0.5124979863940003,
            -1.650559025728212,
            0.14164017320427952,
            0.9721345507508503,
            -1.3152509969732649,
            -0.624107287724917,
            0.9672237339473315,
            0.9555850363363726,
            -1.6727634757982122,
            0.48413577964230925,
            0.23304265981953023,
            0.4501076881896467,
            -0.7680464217537335,
            1.41534128088801,
            -1.0974025473239228,
        ];
        let cfg = ModelConfig {
            layers: 1,
            embed_dim: 4,
            num_heads: 2,
            ff_dim: 8,
            window_len: 8,
            patch_len: 2,
            head_layers: 1,
            activation: Activation::Relu,
            variant: Variant::Custom,
        };
        let params = init_params(&cfg, &HeadSpec::none(), 7, DType::F64).unwrap();
        let window = Tensor::from_f64(
            &[1, 8],
            &(0..8).map(|i| (i as f64 * 0.5).sin()).collect::<Vec<_>>(),
            DType::F64,
        )
        .unwrap();
        let (xn, _) = revin_normalize(&window, 1e-5).unwrap();
        let grid = patchify(&xn, 2).unwrap();
        let seq = project_patches(
            &grid,
            params.get("proj.weight").unwrap(),
            params.get("proj.bias").unwrap(),
        )
        .unwrap();
        let seq = positional_encode(&seq).unwrap();
        let z = encoder_forward(&seq, &params, &cfg).unwrap();
        let got = z.embeddings.to_f64_vec();
        for (g, e) in got.iter().zip(GOLDEN.iter()) {
            assert!((g - e).abs() < 1e-15, "golden mismatch: {g} vs {e}");
        }
    }

    #[test]
    fn full_pipeline_matches_standalone_ops() {
        // The graph-built forward and the plain-op composition must agree
        // bit for bit.
        let cfg = tiny_cfg();
        let model = Model::init(cfg.clone(), HeadSpec::reconstruction(), 11, DType::F64).unwrap();
        let window = Tensor::from_f64(
            &[2, 8],
            &(0..16).map(|i| (i as f64 * 0.7).sin()).collect::<Vec<_>>(),
            DType::F64,
        )
        .unwrap();
        let (xn, _) = revin_normalize(&window, 1e-5).unwrap();

        let recon = model.reconstruct_window(&xn).unwrap();

        let grid = patchify(&xn, cfg.patch_len).unwrap();
        let seq = project_patches(
            &grid,
            model.params.get("proj.weight").unwrap(),
            model.params.get("proj.bias").unwrap(),
        )
        .unwrap();
        let seq = positional_encode(&seq).unwrap();
        let z = encoder_forward(&seq, &model.params, &cfg).unwrap();
        let recon2 = head_reconstruct(&z, &model.params, &cfg).unwrap();
        assert!(recon.bits_eq(&recon2));
    }
}
