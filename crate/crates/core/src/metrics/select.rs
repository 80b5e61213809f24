use crate::error::{Error, Result};

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Scores closer than this count as tied, so roundoff in the normalization
/// cannot reorder epochs whose scores are equal in exact arithmetic.
const TIE_TOLERANCE: f64 = 1e-9;

/// Picks the epoch minimizing the sum of the two validation series after
/// each is z-normalized over epochs `>= start_epoch`. If either series has
/// zero spread the raw sum is minimized instead. Ties (within
/// [`TIE_TOLERANCE`]) go to the earliest epoch. Series are `(epoch, value)`
/// pairs sharing the same epochs.
pub fn select_model(nmse: &[(usize, f64)], fid: &[(usize, f64)], start_epoch: usize) -> Result<usize> {
    if nmse.len() != fid.len() || nmse.iter().zip(fid).any(|(a, b)| a.0 != b.0) {
        return Err(Error::InvalidArgument(
            "NMSE and FID series must cover the same epochs".into(),
        ));
    }
    let (epochs, (n, f)): (Vec<usize>, (Vec<f64>, Vec<f64>)) = nmse
        .iter()
        .zip(fid)
        .filter(|(a, _)| a.0 >= start_epoch)
        .map(|(a, b)| (a.0, (a.1, b.1)))
        .unzip();
    if epochs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "model selection needs at least 2 epochs from epoch {start_epoch}, got {}",
            epochs.len()
        )));
    }
    let (mn, sn) = mean_std(&n);
    let (mf, sf) = mean_std(&f);
    let score = |i: usize| {
        if sn == 0.0 || sf == 0.0 {
            n[i] + f[i]
        } else {
            (n[i] - mn) / sn + (f[i] - mf) / sf
        }
    };
    let mut best = 0;
    for i in 1..epochs.len() {
        if score(i) < score(best) - TIE_TOLERANCE {
            best = i;
        }
    }
    Ok(epochs[best])
}
