use super::{CriticConfig, CriticInput, LRELU_SLOPE};
use crate::autodiff::{BatchNormMode, Graph, ParamSet, RunningStats, Tensor};
use crate::error::{Error, Result};
use crate::real::{lit, Real};

#[derive(Clone, Debug)]
pub struct CriticHandles {
    pub convs: Vec<(Tensor, Tensor)>,
    pub norms: Vec<(Tensor, Tensor)>,
    pub linear: (Tensor, Tensor),
    pub all: Vec<Tensor>,
}

pub fn bind_critic<T: Real>(graph: &mut Graph<T>, params: &ParamSet<T>, requires_grad: bool) -> Result<CriticHandles> {
    let all = params.bind(graph, requires_grad);
    let find = |name: String| -> Result<Tensor> {
        params
            .position(&name)
            .map(|i| all[i])
            .ok_or_else(|| Error::InvalidArgument(format!("missing parameter {name}")))
    };
    let mut convs = Vec::new();
    let mut norms = Vec::new();
    for j in 0..4 {
        convs.push((
            find(format!("critic.conv{j}.weight"))?,
            find(format!("critic.conv{j}.bias"))?,
        ));
        norms.push((
            find(format!("critic.bn{j}.gamma"))?,
            find(format!("critic.bn{j}.beta"))?,
        ));
    }
    let linear = (find("critic.linear.weight".into())?, find("critic.linear.bias".into())?);
    Ok(CriticHandles {
        convs,
        norms,
        linear,
        all,
    })
}

/// Critic score `[B,1]` of each (condition, candidate) pair: four
/// stride-2 convolution, batch-norm and leaky ReLU stages, then a linear
/// head over the flattened features.
pub fn patchgan_forward<T: Real>(
    graph: &mut Graph<T>,
    m_z: Tensor,
    candidate: Tensor,
    handles: &CriticHandles,
    stats: &mut [RunningStats<T>],
    mode: BatchNormMode,
    config: &CriticConfig,
) -> Result<Tensor> {
    let shape = graph.shape(candidate).to_vec();
    if shape.len() != 4 || shape[2] < 16 || shape[3] < 16 {
        return Err(Error::shape(
            "patchgan_forward",
            format!("need a [B,2,H,W] candidate with H, W >= 16, got {shape:?}"),
        ));
    }
    if stats.len() != handles.norms.len() {
        return Err(Error::InvalidArgument(format!(
            "{} batch-norm stat sets for {} layers",
            stats.len(),
            handles.norms.len()
        )));
    }
    let mut x = match config.input {
        CriticInput::Conditional => graph.concat_channels(&[m_z, candidate])?,
        CriticInput::ConditionalMagnitude => {
            let a = graph.magnitude(m_z)?;
            let b = graph.magnitude(candidate)?;
            graph.concat_channels(&[a, b])?
        }
        CriticInput::Unconditional => candidate,
    };
    for ((&(w, b), &(gamma, beta)), st) in handles.convs.iter().zip(&handles.norms).zip(stats.iter_mut()) {
        x = graph.conv2d(x, w, b, 2)?;
        x = graph.batch_norm2d(x, gamma, beta, mode, st)?;
        x = graph.leaky_relu(x, lit(LRELU_SLOPE));
    }
    let s = graph.shape(x).to_vec();
    let x = graph.reshape(x, &[s[0], s[1] * s[2] * s[3]])?;
    graph.linear(x, handles.linear.0, handles.linear.1)
}
