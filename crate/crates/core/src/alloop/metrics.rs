use crate::error::{Error, Result};

fn check_lengths(preds: &[usize], labels: &[usize]) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(Error::Parameter(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    Ok(())
}

pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check_lengths(preds, labels)?;
    if preds.is_empty() {
        return Err(Error::Parameter("accuracy of an empty set".into()));
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// `O[true][pred]` counts.
pub fn confusion(preds: &[usize], labels: &[usize], classes: usize) -> Result<Vec<Vec<usize>>> {
    check_lengths(preds, labels)?;
    let mut o = vec![vec![0; classes]; classes];
    for (&p, &l) in preds.iter().zip(labels) {
        if p >= classes || l >= classes {
            return Err(Error::Parameter(format!("class index outside [0, {classes})")));
        }
        o[l][p] += 1;
    }
    Ok(o)
}

#[derive(Clone, Debug, PartialEq)]
pub struct F1Report {
    pub per_class: Vec<f64>,
    pub macro_f1: f64,
    /// Classes with `P + R = 0`, scored as 0.
    pub zero_by_convention: Vec<usize>,
}

pub fn macro_f1(preds: &[usize], labels: &[usize], classes: usize) -> Result<F1Report> {
    f1_from_confusion(&confusion(preds, labels, classes)?)
}

pub fn f1_from_confusion(o: &[Vec<usize>]) -> Result<F1Report> {
    let c = o.len();
    if c == 0 {
        return Err(Error::Parameter("no classes".into()));
    }
    let mut per_class = Vec::with_capacity(c);
    let mut flagged = Vec::new();
    for k in 0..c {
        let tp = o[k][k] as f64;
        let predicted: usize = (0..c).map(|i| o[i][k]).sum();
        let actual: usize = o[k].iter().sum();
        let p = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let r = if actual > 0 { tp / actual as f64 } else { 0.0 };
        if p + r == 0.0 {
            flagged.push(k);
            per_class.push(0.0);
        } else {
            per_class.push(2.0 * p * r / (p + r));
        }
    }
    let macro_f1 = per_class.iter().sum::<f64>() / c as f64;
    Ok(F1Report {
        per_class,
        macro_f1,
        zero_by_convention: flagged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kappa {
    pub value: f64,
    /// The expected-disagreement denominator was zero; `value` is 0.
    pub degenerate: bool,
}

/// Cohen's kappa with quadratic weights `(i−j)²/(C−1)²`.
pub fn quadratic_kappa(preds: &[usize], labels: &[usize], classes: usize) -> Result<Kappa> {
    kappa_from_confusion(&confusion(preds, labels, classes)?)
}

pub fn kappa_from_confusion(o: &[Vec<usize>]) -> Result<Kappa> {
    let c = o.len();
    if c < 2 {
        return Err(Error::Parameter("kappa needs at least two classes".into()));
    }
    let n: usize = o.iter().flatten().sum();
    let rows: Vec<f64> = o.iter().map(|r| r.iter().sum::<usize>() as f64).collect();
    let cols: Vec<f64> = (0..c).map(|j| (0..c).map(|i| o[i][j]).sum::<usize>() as f64).collect();
    let scale = ((c - 1) * (c - 1)) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..c {
        for j in 0..c {
            let w = ((i as f64) - (j as f64)).powi(2) / scale;
            num += w * o[i][j] as f64;
            if n > 0 {
                den += w * rows[i] * cols[j] / n as f64;
            }
        }
    }
    if den == 0.0 {
        return Ok(Kappa {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Kappa {
        value: 1.0 - num / den,
        degenerate: false,
    })
}
