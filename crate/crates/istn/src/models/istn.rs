use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Checkpoint, Network};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::stn::{Stn, StnKind};
use super::tables;

/// Which geometric component an ISTN carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StnChoice {
    None,
    Affine,
    Bspline,
}

impl StnChoice {
    pub fn kind(self) -> Option<StnKind> {
        match self {
            StnChoice::None => None,
            StnChoice::Affine => Some(StnKind::Affine),
            StnChoice::Bspline => Some(StnKind::Bspline),
        }
    }
}

impl std::str::FromStr for StnChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(StnChoice::None),
            "affine" => Ok(StnChoice::Affine),
            "bspline" => Ok(StnChoice::Bspline),
            other => Err(Error::Config(format!("unknown stn kind '{other}'"))),
        }
    }
}

/// Generator of the adversarial game: appearance network (ITN) feeding a
/// spatial transformer (STN), composed into one trainable unit. Either half
/// may be absent; with both absent the model is the identity map.
pub struct IstnModel<T> {
    pub itn: Option<Network<T>>,
    pub stn: Option<Stn<T>>,
    cached_itn_out: Option<Tensor<T>>,
}

impl<T: Scalar> IstnModel<T> {
    pub fn new(itn: Option<Network<T>>, stn: Option<Stn<T>>) -> Self {
        Self {
            itn,
            stn,
            cached_itn_out: None,
        }
    }

    /// Standard build for the 2D (28x28) or 3D (64^3) pipeline; `slim`
    /// selects the narrow 3D variants.
    pub fn build(
        use_itn: bool,
        stn: StnChoice,
        dim: usize,
        cp_spacing: Option<usize>,
        slim: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let (itn_spec, spatial): (_, Vec<usize>) = match (dim, slim) {
            (2, _) => (tables::itn_2d_spec(), vec![28, 28]),
            (3, false) => (tables::itn_3d_spec(), vec![64, 64, 64]),
            (3, true) => (tables::itn_3d_slim_spec(), vec![64, 64, 64]),
            _ => return Err(Error::Config(format!("unsupported dim {dim}"))),
        };
        let itn = if use_itn {
            Some(Network::build(itn_spec, rng)?)
        } else {
            None
        };
        let stn = match stn.kind() {
            None => None,
            Some(kind) => Some(Stn::build(kind, dim, &spatial, cp_spacing, slim, rng)?),
        };
        Ok(Self::new(itn, stn))
    }

    /// `STN(ITN(x))`; with a missing component the remaining one acts alone,
    /// and with both missing this is the identity.
    pub fn forward(&mut self, x: &Tensor<T>, train: bool, rng: &mut ChaCha8Rng) -> Result<Tensor<T>> {
        let mid = match &mut self.itn {
            Some(itn) => itn.forward(x, train, rng),
            None => x.clone(),
        };
        let out = match &mut self.stn {
            Some(stn) => stn.forward(&mid, train, rng)?,
            None => mid.clone(),
        };
        self.cached_itn_out = Some(mid);
        Ok(out)
    }

    /// The appearance-only intermediate from the last forward.
    pub fn last_itn_output(&self) -> Option<&Tensor<T>> {
        self.cached_itn_out.as_ref()
    }

    pub fn backward(&mut self, gout: &Tensor<T>) -> Result<Tensor<T>> {
        let gmid = match &mut self.stn {
            Some(stn) => stn.backward(gout)?,
            None => gout.clone(),
        };
        match &mut self.itn {
            Some(itn) => Ok(itn.backward(&gmid)),
            None => Ok(gmid),
        }
    }

    pub fn zero_grad(&mut self) {
        if let Some(itn) = &mut self.itn {
            itn.zero_grad();
        }
        if let Some(stn) = &mut self.stn {
            stn.zero_grad();
        }
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(String, &mut Vec<T>, &mut Vec<T>)) {
        if let Some(itn) = &mut self.itn {
            itn.visit_params(&mut |name, p, g| f(format!("itn.{name}"), p, g));
        }
        if let Some(stn) = &mut self.stn {
            stn.visit_params(&mut |name, p, g| f(format!("stn.{name}"), p, g));
        }
    }

    pub fn visit_state(&mut self, f: &mut dyn FnMut(String, &mut Vec<T>)) {
        if let Some(itn) = &mut self.itn {
            itn.visit_state(&mut |name, s| f(format!("itn.{name}"), s));
        }
        if let Some(stn) = &mut self.stn {
            stn.visit_state(&mut |name, s| f(format!("stn.{name}"), s));
        }
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p, _| n += p.len());
        n
    }
}

/// Writes a model's parameters and running state into a checkpoint under a
/// name prefix.
pub fn pack_network<T: Scalar>(ck: &mut Checkpoint<T>, prefix: &str, net: &mut Network<T>) {
    net.visit_params(&mut |name, p, _| ck.push(&format!("{prefix}.{name}"), p));
    net.visit_state(&mut |name, s| ck.push(&format!("{prefix}.state.{name}"), s));
}

pub fn unpack_network<T: Scalar>(ck: &Checkpoint<T>, prefix: &str, net: &mut Network<T>) -> Result<()> {
    let mut err = None;
    net.visit_params(&mut |name, p, _| {
        if err.is_some() {
            return;
        }
        match ck.get(&format!("{prefix}.{name}")) {
            Ok(vals) if vals.len() == p.len() => p.copy_from_slice(vals),
            Ok(vals) => {
                err = Some(Error::Shape(format!(
                    "{prefix}.{name}: checkpoint has {} values, model needs {}",
                    vals.len(),
                    p.len()
                )))
            }
            Err(e) => err = Some(e),
        }
    });
    net.visit_state(&mut |name, s| {
        if err.is_some() {
            return;
        }
        match ck.get(&format!("{prefix}.state.{name}")) {
            Ok(vals) if vals.len() == s.len() => s.copy_from_slice(vals),
            Ok(vals) => {
                err = Some(Error::Shape(format!(
                    "{prefix}.state.{name}: checkpoint has {} values, model needs {}",
                    vals.len(),
                    s.len()
                )))
            }
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

pub fn pack_istn<T: Scalar>(ck: &mut Checkpoint<T>, prefix: &str, model: &mut IstnModel<T>) {
    model.visit_params(&mut |name, p, _| ck.push(&format!("{prefix}.{name}"), p));
    model.visit_state(&mut |name, s| ck.push(&format!("{prefix}.state.{name}"), s));
}

pub fn unpack_istn<T: Scalar>(ck: &Checkpoint<T>, prefix: &str, model: &mut IstnModel<T>) -> Result<()> {
    let mut err = None;
    model.visit_params(&mut |name, p, _| {
        if err.is_some() {
            return;
        }
        match ck.get(&format!("{prefix}.{name}")) {
            Ok(vals) if vals.len() == p.len() => p.copy_from_slice(vals),
            Ok(_) => err = Some(Error::Shape(format!("{prefix}.{name}: size mismatch"))),
            Err(e) => err = Some(e),
        }
    });
    model.visit_state(&mut |name, s| {
        if err.is_some() {
            return;
        }
        match ck.get(&format!("{prefix}.state.{name}")) {
            Ok(vals) if vals.len() == s.len() => s.copy_from_slice(vals),
            Ok(_) => err = Some(Error::Shape(format!("{prefix}.state.{name}: size mismatch"))),
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Save/load a standalone network checkpoint file.
pub fn save_network<T: Scalar>(path: &Path, name: &str, net: &mut Network<T>) -> Result<()> {
    let mut ck = Checkpoint::new();
    pack_network(&mut ck, name, net);
    ck.save(path)
}

pub fn load_network<T: Scalar>(path: &Path, name: &str, net: &mut Network<T>) -> Result<()> {
    let ck = Checkpoint::load(path)?;
    unpack_network(&ck, name, net)
}
