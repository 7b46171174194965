//! Symmetric triangle rules and Gauss-Legendre edge rules.

/// Quadrature on the reference triangle with vertices (0,0), (1,0), (0,1).
///
/// Points are barycentric triples; weights sum to the reference area 1/2.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

fn push_orbits(rule: &mut QuadratureRule, centroid: Option<f64>, a_orbits: &[(f64, f64)], abc_orbits: &[(f64, f64, f64)]) {
    if let Some(w) = centroid {
        rule.points.push([1.0 / 3.0; 3]);
        rule.weights.push(0.5 * w);
    }
    for &(w, a) in a_orbits {
        let b = 1.0 - 2.0 * a;
        for p in [[a, a, b], [a, b, a], [b, a, a]] {
            rule.points.push(p);
            rule.weights.push(0.5 * w);
        }
    }
    for &(w, a, b) in abc_orbits {
        let c = 1.0 - a - b;
        for p in [[a, b, c], [b, a, c], [a, c, b], [c, a, b], [b, c, a], [c, b, a]] {
            rule.points.push(p);
            rule.weights.push(0.5 * w);
        }
    }
}

impl QuadratureRule {
    /// 12-point rule exact for polynomials of degree 6.
    pub fn degree6() -> Self {
        let mut r = QuadratureRule { points: vec![], weights: vec![], degree: 6 };
        push_orbits(
            &mut r,
            None,
            &[
                (0.116_786_275_726_379_366_03, 0.249_286_745_170_910_421_29),
                (0.050_844_906_370_206_816_921, 0.063_089_014_491_502_228_34),
            ],
            &[(0.082_851_075_618_373_575_194, 0.053_145_049_844_816_947_353, 0.310_352_451_033_784_405_42)],
        );
        r
    }

    /// 19-point rule exact for polynomials of degree 9.
    pub fn degree9() -> Self {
        let mut r = QuadratureRule { points: vec![], weights: vec![], degree: 9 };
        push_orbits(
            &mut r,
            Some(0.097_135_796_282_798_833_819),
            &[
                (0.031_334_700_227_139_070_537, 0.489_682_519_198_737_627_78),
                (0.077_827_541_004_774_279_317, 0.437_089_591_492_936_637_27),
                (0.079_647_738_927_210_253_033, 0.188_203_535_619_032_730_24),
                (0.025_577_675_658_698_031_262, 0.044_729_513_394_452_709_865),
            ],
            &[(0.043_283_539_377_289_377_289, 0.036_838_412_054_736_283_635, 0.221_962_989_160_765_695_68)],
        );
        r
    }

    /// Composite rule: the reference triangle split `levels` times into four
    /// congruent children, each carrying a copy of this rule.
    pub fn subdivided(&self, levels: usize) -> Self {
        let mut out = self.clone();
        for _ in 0..levels {
            let e = |i: usize| {
                let mut v = [0.0; 3];
                v[i] = 1.0;
                v
            };
            let mid = |i: usize, j: usize| {
                let mut v = [0.0; 3];
                v[i] = 0.5;
                v[j] = 0.5;
                v
            };
            let children = [
                [e(0), mid(0, 1), mid(2, 0)],
                [mid(0, 1), e(1), mid(1, 2)],
                [mid(2, 0), mid(1, 2), e(2)],
                [mid(1, 2), mid(2, 0), mid(0, 1)],
            ];
            let mut points = Vec::with_capacity(4 * out.len());
            let mut weights = Vec::with_capacity(4 * out.len());
            for c in &children {
                for (p, w) in out.points.iter().zip(&out.weights) {
                    let mut q = [0.0; 3];
                    for (k, corner) in c.iter().enumerate() {
                        for d in 0..3 {
                            q[d] += p[k] * corner[d];
                        }
                    }
                    points.push(q);
                    weights.push(0.25 * w);
                }
            }
            out.points = points;
            out.weights = weights;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre rule on [0, 1]: (parameter, weight) pairs, weights sum to 1.
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl EdgeRule {
    /// `n`-point Gauss-Legendre rule, exact through degree 2n-1.
    pub fn gauss(n: usize) -> Self {
        let mut points = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // Newton on P_n from the Chebyshev-like initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 0 { 1.0 } else { p1 };
                let pn1 = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            points.push(0.5 * (1.0 - x));
            weights.push(1.0 / ((1.0 - x * x) * dp * dp));
        }
        EdgeRule { points, weights, degree: 2 * n - 1 }
    }

    /// Four points, exact through degree 7.
    pub fn gauss4() -> Self {
        let (x1, w1) = (0.339_981_043_584_856_264_8, 0.652_145_154_862_546_142_6);
        let (x2, w2) = (0.861_136_311_594_052_575_2, 0.347_854_845_137_453_857_4);
        let nodes = [(-x2, w2), (-x1, w1), (x1, w1), (x2, w2)];
        EdgeRule {
            points: nodes.iter().map(|&(x, _)| 0.5 * (1.0 + x)).collect(),
            weights: nodes.iter().map(|&(_, w)| 0.5 * w).collect(),
            degree: 7,
        }
    }
}
