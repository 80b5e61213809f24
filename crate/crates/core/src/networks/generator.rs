use super::{gen_conv_name, gen_dc_name, Batch, GeneratorConfig, LRELU_SLOPE};
use crate::autodiff::{Graph, ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::real::{lit, Real};

/// Graph handles for the generator parameters of one forward pass.
#[derive(Clone, Debug)]
pub struct GeneratorHandles {
    /// Per iteration: `(weight, bias)` of the three convolutions.
    pub convs: Vec<[(Tensor, Tensor); 3]>,
    pub dc_weights: Vec<Tensor>,
    /// Every handle in parameter-set order.
    pub all: Vec<Tensor>,
}

fn lookup(params: &ParamSet<impl Real>, all: &[Tensor], name: &str, shape: &[usize]) -> Result<Tensor> {
    let i = params
        .position(name)
        .ok_or_else(|| Error::InvalidArgument(format!("missing parameter {name}")))?;
    let p = params.iter().nth(i).expect("position is in range");
    if p.shape != shape {
        return Err(Error::shape(
            "parameters",
            format!("{name} has shape {:?}, config expects {shape:?}", p.shape),
        ));
    }
    Ok(all[i])
}

pub fn bind_generator<T: Real>(
    graph: &mut Graph<T>,
    params: &ParamSet<T>,
    config: &GeneratorConfig,
    requires_grad: bool,
) -> Result<GeneratorHandles> {
    let all = params.bind(graph, requires_grad);
    let k = config.kernel_size;
    let mut convs = Vec::with_capacity(config.n_iterations);
    let mut dc_weights = Vec::with_capacity(config.n_iterations);
    for i in 0..config.n_iterations {
        let mut layer = [(all[0], all[0]); 3];
        for (j, &(cin, cout)) in config.conv_channels().iter().enumerate() {
            layer[j] = (
                lookup(params, &all, &gen_conv_name(i, j, "weight"), &[cout, cin, k, k])?,
                lookup(params, &all, &gen_conv_name(i, j, "bias"), &[cout])?,
            );
        }
        convs.push(layer);
        dc_weights.push(lookup(params, &all, &gen_dc_name(i), &[1])?);
    }
    Ok(GeneratorHandles { convs, dc_weights, all })
}

/// `m_in − λ · Σᵢ conj(sᵢ) ⊙ F⁻¹(M ⊙ F(sᵢ ⊙ m_in) − K_u,ᵢ)`.
pub fn dc_unit<T: Real>(graph: &mut Graph<T>, m_in: Tensor, lambda: Tensor, batch: &Batch<T>) -> Result<Tensor> {
    if graph.shape(m_in) != batch.image_shape() {
        return Err(Error::shape(
            "dc_unit",
            format!("input {:?} vs batch {:?}", graph.shape(m_in), batch.image_shape()),
        ));
    }
    let mut total: Option<Tensor> = None;
    for (s, neg_k) in batch.maps.iter().zip(&batch.neg_k_u) {
        let x = graph.complex_mul(m_in, s.clone(), false)?;
        let k = graph.fft2(x)?;
        let k = graph.mul_elem(k, batch.mask.clone())?;
        let r = graph.add_const(k, neg_k)?;
        let r = graph.ifft2(r)?;
        let r = graph.complex_mul(r, s.clone(), true)?;
        total = Some(match total {
            Some(t) => graph.add(t, r)?,
            None => r,
        });
    }
    let total = total.ok_or(Error::Empty("dc_unit coils"))?;
    let correction = graph.scale_by(total, lambda)?;
    graph.sub(m_in, correction)
}

/// Three same-padded convolutions, each followed by a leaky ReLU.
pub fn conv_unit<T: Real>(
    graph: &mut Graph<T>,
    input: Tensor,
    convs: &[(Tensor, Tensor); 3],
    config: &GeneratorConfig,
) -> Result<Tensor> {
    let channels = graph.shape(input).get(1).copied();
    if channels != Some(config.unit_input_channels()) {
        return Err(Error::shape(
            "conv_unit",
            format!(
                "expected {} input channels, got {:?}",
                config.unit_input_channels(),
                graph.shape(input)
            ),
        ));
    }
    let mut x = input;
    for &(w, b) in convs {
        x = graph.conv2d(x, w, b, 1)?;
        x = graph.leaky_relu(x, lit(LRELU_SLOPE));
    }
    Ok(x)
}

/// Indices of the earlier outputs feeding iteration `i` (1-based), most
/// recent first; `None` marks a zero placeholder.
pub fn dense_sources(i: usize, growth: usize) -> Vec<Option<usize>> {
    (1..=growth + 1).map(|back| i.checked_sub(back)).collect()
}

/// Result of a generator forward pass.
#[derive(Clone, Debug)]
pub struct GeneratorTrace {
    pub output: Tensor,
    /// Outputs `x₀ … x_N`, with `x₀ = m_z`.
    pub iterates: Vec<Tensor>,
    /// Concatenated input of each convolutional unit.
    pub unit_inputs: Vec<Tensor>,
    pub placeholder: Tensor,
}

pub fn dci_forward<T: Real>(
    graph: &mut Graph<T>,
    batch: &Batch<T>,
    handles: &GeneratorHandles,
    config: &GeneratorConfig,
) -> Result<GeneratorTrace> {
    if (batch.height, batch.width, batch.n_coils()) != (config.height, config.width, config.n_coils) {
        return Err(Error::shape(
            "dci_forward",
            format!(
                "batch {}x{} with {} coils vs config {}x{} with {}",
                batch.height,
                batch.width,
                batch.n_coils(),
                config.height,
                config.width,
                config.n_coils
            ),
        ));
    }
    if handles.convs.len() != config.n_iterations {
        return Err(Error::InvalidArgument(format!(
            "{} bound iterations vs {} configured",
            handles.convs.len(),
            config.n_iterations
        )));
    }
    let shape = batch.image_shape();
    let placeholder = graph.zeros(&shape);
    let mut iterates = vec![graph.constant(batch.m_z.clone(), &shape)];
    let mut unit_inputs = Vec::with_capacity(config.n_iterations);
    for i in 1..=config.n_iterations {
        let parts: Vec<Tensor> = dense_sources(i, config.growth)
            .into_iter()
            .map(|s| s.map_or(placeholder, |j| iterates[j]))
            .collect();
        let input = graph.concat_channels(&parts)?;
        unit_inputs.push(input);
        let refined = conv_unit(graph, input, &handles.convs[i - 1], config)?;
        let x = graph.add(iterates[i - 1], refined)?;
        let x = dc_unit(graph, x, handles.dc_weights[i - 1], batch)?;
        iterates.push(x);
    }
    Ok(GeneratorTrace {
        output: *iterates.last().expect("at least m_z"),
        iterates,
        unit_inputs,
        placeholder,
    })
}
