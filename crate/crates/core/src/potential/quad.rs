//! Adaptive Gauss-Kronrod quadrature (7-point Gauss, 15-point Kronrod)
//! for vector-valued integrands.

use super::PotentialError;

const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the nodes `XK[1], XK[3], XK[5], XK[7]`.
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

pub const RULE_NAME: &str = "gauss-kronrod 7/15";

#[derive(Clone, Copy, Debug, Default)]
pub struct QuadStats {
    pub panels: usize,
    pub error: f64,
}

impl QuadStats {
    pub fn merge(&mut self, o: QuadStats) {
        self.panels += o.panels;
        self.error += o.error;
    }
}

/// One panel: Kronrod estimate and `max |K - G|`.
fn panel<F>(f: &F, a: f64, b: f64) -> Result<(Vec<f64>, f64), PotentialError>
where
    F: Fn(f64) -> Result<Vec<f64>, PotentialError>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k: Option<Vec<f64>> = None;
    let mut g: Option<Vec<f64>> = None;
    let acc = |dst: &mut Option<Vec<f64>>, v: &[f64], w: f64| match dst {
        None => *dst = Some(v.iter().map(|x| w * x).collect()),
        Some(d) => d.iter_mut().zip(v).for_each(|(d, x)| *d += w * x),
    };
    for i in 0..8 {
        let xs: &[f64] = if i == 7 { &[0.0] } else { &[-XK[i], XK[i]] };
        for &x in xs {
            let v = f(c + h * x)?;
            acc(&mut k, &v, WK[i]);
            if i % 2 == 1 {
                acc(&mut g, &v, WG[i / 2]);
            }
        }
    }
    let (k, g) = (k.unwrap(), g.unwrap());
    let err = k.iter().zip(&g).map(|(a, b)| (h * (a - b)).abs()).fold(0.0, f64::max);
    Ok((k.into_iter().map(|x| h * x).collect(), err))
}

/// `∫_a^b f` with bisection until each panel meets its share of `tol`.
pub fn integrate<F>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<(Vec<f64>, QuadStats), PotentialError>
where
    F: Fn(f64) -> Result<Vec<f64>, PotentialError>,
{
    let (v, e) = panel(f, a, b)?;
    refine(f, a, b, v, e, tol, max_depth)
}

fn refine<F>(f: &F, a: f64, b: f64, v: Vec<f64>, e: f64, tol: f64, depth: u32) -> Result<(Vec<f64>, QuadStats), PotentialError>
where
    F: Fn(f64) -> Result<Vec<f64>, PotentialError>,
{
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if e <= tol.max(1e-14 * scale) || a == b {
        return Ok((v, QuadStats { panels: 1, error: e }));
    }
    if depth == 0 {
        return Err(PotentialError::QuadratureFailure { a, b, error: e });
    }
    let m = 0.5 * (a + b);
    let (vl, el) = panel(f, a, m)?;
    let (vr, er) = panel(f, m, b)?;
    let (mut l, mut sl) = refine(f, a, m, vl, el, 0.5 * tol, depth - 1)?;
    let (r, sr) = refine(f, m, b, vr, er, 0.5 * tol, depth - 1)?;
    l.iter_mut().zip(&r).for_each(|(x, y)| *x += y);
    sl.merge(sr);
    Ok((l, sl))
}
