use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-12;

/// A unit vector on the Bloch sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    x: f64,
    y: f64,
    z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n2 = x * x + y * y + z * z;
        if !n2.is_finite() || (n2 - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidState(format!("Bloch vector ({x}, {y}, {z}) has squared norm {n2}")));
        }
        Ok(Self { x, y, z })
    }

    /// Rescales an arbitrary nonzero vector onto the sphere.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Ok(Self { x: x / n, y: y / n, z: z / n })
    }

    /// Direction with polar angle `theta` and azimuth `phi`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self { x: st * cp, y: st * sp, z: ct }
    }

    pub fn x() -> Self {
        Self { x: 1.0, y: 0.0, z: 0.0 }
    }
    pub fn y() -> Self {
        Self { x: 0.0, y: 1.0, z: 0.0 }
    }
    pub fn z() -> Self {
        Self { x: 0.0, y: 0.0, z: 1.0 }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn neg(&self) -> Self {
        Self { x: -self.x, y: -self.y, z: -self.z }
    }

    /// Eigenvectors `(|n+>, |n->)` of `n . sigma`.
    pub(crate) fn eigenvectors(&self) -> ([Complex64; 2], [Complex64; 2]) {
        let theta = self.z.clamp(-1.0, 1.0).acos();
        let phi = self.y.atan2(self.x);
        let (s, c) = (0.5 * theta).sin_cos();
        let e = Complex64::from_polar(1.0, phi);
        let plus = [Complex64::new(c, 0.0), e * s];
        let minus = [Complex64::new(s, 0.0), -e * c];
        (plus, minus)
    }

    /// Projector `(1 + n . sigma) / 2` as a row-major 2x2 matrix.
    pub(crate) fn projector(&self) -> [[Complex64; 2]; 2] {
        let h = 0.5;
        [
            [Complex64::new(h * (1.0 + self.z), 0.0), Complex64::new(h * self.x, -h * self.y)],
            [Complex64::new(h * self.x, h * self.y), Complex64::new(h * (1.0 - self.z), 0.0)],
        ]
    }
}

/// Haar-random measurement direction: cos(theta) uniform on [-1, 1] and
/// azimuth uniform on [0, 2 pi).
pub fn sample_direction<R: Rng + ?Sized>(rng: &mut R) -> BlochVector {
    let z: f64 = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.random::<f64>();
    let r = (1.0 - z * z).max(0.0).sqrt();
    let (sp, cp) = phi.sin_cos();
    BlochVector { x: r * cp, y: r * sp, z }
}

/// Pure state of two or three qubits. Qubit 0 is the most significant bit of
/// the amplitude index.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
    parties: usize,
}

impl PureState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let parties = match amplitudes.len() {
            4 => 2,
            8 => 3,
            n => return Err(Error::InvalidState(format!("expected 4 or 8 amplitudes, got {n}"))),
        };
        let n2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !n2.is_finite() || (n2 - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidState(format!("squared norm {n2} is not 1")));
        }
        Ok(Self { amplitudes, parties })
    }

    /// Builds a state from unnormalized amplitudes.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidState("all amplitudes are zero".into()));
        }
        Self::new(amplitudes.into_iter().map(|a| a / n).collect())
    }

    fn from_real(amps: &[f64]) -> Self {
        Self::normalized(amps.iter().map(|&a| Complex64::new(a, 0.0)).collect())
            .expect("hard-coded state is valid")
    }

    /// (|01> - |10>)/sqrt 2
    pub fn singlet() -> Self {
        Self::from_real(&[0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0])
    }

    /// (|000> + |111>)/sqrt 2
    pub fn ghz3() -> Self {
        Self::from_real(&[FRAC_1_SQRT_2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, FRAC_1_SQRT_2])
    }

    /// (|001> + |010> + |100>)/sqrt 3
    pub fn w3() -> Self {
        Self::from_real(&[0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    }

    /// (|000> + e^{-i phi}|111>)/sqrt 2.
    ///
    /// The relative phase carries a minus sign so that with `sigma_x` and
    /// `sigma_y` measurements the three-party correlator on the `yyy` setting
    /// equals `+sin(phi)`.
    pub fn ghz_rotated(phi: f64) -> Self {
        let mut a = vec![Complex64::new(0.0, 0.0); 8];
        a[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
        a[7] = Complex64::from_polar(FRAC_1_SQRT_2, -phi);
        Self { amplitudes: a, parties: 3 }
    }

    /// (|000> + alpha|111>)/sqrt(1 + alpha^2)
    pub fn ghz_weighted(alpha: f64) -> Result<Self> {
        let mut a = vec![0.0; 8];
        a[0] = 1.0;
        a[7] = alpha;
        Self::normalized(a.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }

    /// (|00> + alpha|11>)/sqrt(1 + alpha^2)
    pub fn eberhard(alpha: f64) -> Result<Self> {
        Self::normalized(
            [1.0, 0.0, 0.0, alpha].into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        )
    }

    /// |0...0> on `parties` qubits.
    pub fn product_zero(parties: usize) -> Result<Self> {
        if !(2..=3).contains(&parties) {
            return Err(Error::InvalidState(format!("unsupported party count {parties}")));
        }
        let mut a = vec![Complex64::new(0.0, 0.0); 1 << parties];
        a[0] = Complex64::new(1.0, 0.0);
        Self::new(a)
    }

    /// Tensor product of single-qubit states pointing along `dirs`.
    pub fn product(dirs: &[BlochVector]) -> Result<Self> {
        if !(2..=3).contains(&dirs.len()) {
            return Err(Error::InvalidState(format!("unsupported party count {}", dirs.len())));
        }
        let mut amps = vec![Complex64::new(1.0, 0.0)];
        for d in dirs {
            let (plus, _) = d.eigenvectors();
            amps = amps.iter().flat_map(|a| [a * plus[0], a * plus[1]]).collect();
        }
        Self::normalized(amps)
    }

    /// Parses `singlet`, `ghz3`, `w3`, `ghz-rot:<phi>`, `ghz-alpha:<a>`,
    /// `eberhard:<a>`, `product2` or `product3`.
    pub fn from_name(name: &str) -> Result<Self> {
        let param = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::InvalidState(format!("bad parameter in state name {name:?}")))
        };
        match name {
            "singlet" => Ok(Self::singlet()),
            "ghz3" | "ghz" => Ok(Self::ghz3()),
            "w3" | "w" => Ok(Self::w3()),
            "product2" => Self::product_zero(2),
            "product3" => Self::product_zero(3),
            _ => {
                if let Some(p) = name.strip_prefix("ghz-rot:") {
                    Ok(Self::ghz_rotated(param(p)?))
                } else if let Some(p) = name.strip_prefix("ghz-alpha:") {
                    Self::ghz_weighted(param(p)?)
                } else if let Some(p) = name.strip_prefix("eberhard:") {
                    Self::eberhard(param(p)?)
                } else {
                    Err(Error::InvalidState(format!("unknown state {name:?}")))
                }
            }
        }
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn with_global_phase(&self, phase: f64) -> Self {
        let g = Complex64::from_polar(1.0, phase);
        Self { amplitudes: self.amplitudes.iter().map(|a| a * g).collect(), parties: self.parties }
    }

    /// `<psi| E_0 (x) ... (x) E_{N-1} |psi>` for single-qubit operators.
    pub(crate) fn expectation(&self, ops: &[&[[Complex64; 2]; 2]]) -> f64 {
        debug_assert_eq!(ops.len(), self.parties);
        let mut v = self.amplitudes.clone();
        let n = self.parties;
        for (party, op) in ops.iter().enumerate() {
            let stride = 1 << (n - 1 - party);
            for base in 0..v.len() {
                if base & stride != 0 {
                    continue;
                }
                let (a0, a1) = (v[base], v[base | stride]);
                v[base] = op[0][0] * a0 + op[0][1] * a1;
                v[base | stride] = op[1][0] * a0 + op[1][1] * a1;
            }
        }
        self.amplitudes.iter().zip(&v).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// Per-party lists of measurement directions.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementFrame {
    settings: Vec<Vec<BlochVector>>,
}

impl MeasurementFrame {
    pub fn new(settings: Vec<Vec<BlochVector>>) -> Result<Self> {
        if settings.is_empty() {
            return Err(Error::DimensionMismatch("frame has no parties".into()));
        }
        if let Some(p) = settings.iter().position(|s| s.is_empty()) {
            return Err(Error::DimensionMismatch(format!("party {p} has no settings")));
        }
        Ok(Self { settings })
    }

    /// Draws `m[i]` Haar-random directions for each party from its own stream.
    pub fn sample<R: Rng>(m: &[usize], rngs: &mut [R]) -> Result<Self> {
        if m.len() != rngs.len() {
            return Err(Error::DimensionMismatch("one random stream per party is required".into()));
        }
        let settings = m
            .iter()
            .zip(rngs.iter_mut())
            .map(|(&mi, rng)| (0..mi).map(|_| sample_direction(rng)).collect())
            .collect();
        Self::new(settings)
    }

    pub fn parties(&self) -> usize {
        self.settings.len()
    }

    pub fn settings_per_party(&self) -> Vec<usize> {
        self.settings.iter().map(Vec::len).collect()
    }

    pub fn party(&self, i: usize) -> &[BlochVector] {
        &self.settings[i]
    }

    /// Keeps only the first `m[i]` settings of each party.
    pub fn prefix(&self, m: &[usize]) -> Result<Self> {
        if m.len() != self.parties() {
            return Err(Error::DimensionMismatch("prefix length differs from party count".into()));
        }
        let mut out = Vec::with_capacity(m.len());
        for (p, (&mi, s)) in m.iter().zip(&self.settings).enumerate() {
            if mi == 0 || mi > s.len() {
                return Err(Error::DimensionMismatch(format!("party {p}: cannot keep {mi} of {} settings", s.len())));
            }
            out.push(s[..mi].to_vec());
        }
        Self::new(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigenvectors_match_projector() {
        let n = BlochVector::normalized(0.3, -0.4, 0.5).unwrap();
        let (p, m) = n.eigenvectors();
        let proj = n.projector();
        for i in 0..2 {
            for j in 0..2 {
                let outer = p[i] * p[j].conj();
                assert!((outer - proj[i][j]).norm() < 1e-14);
            }
        }
        let overlap = p[0].conj() * m[0] + p[1].conj() * m[1];
        assert!(overlap.norm() < 1e-14);
    }

    #[test]
    fn samples_are_unit_and_deterministic() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let u = sample_direction(&mut a);
            assert_eq!(u, sample_direction(&mut b));
            let [x, y, z] = u.components();
            assert!((x * x + y * y + z * z - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn named_states_are_normalized() {
        for name in ["singlet", "ghz3", "w3", "ghz-rot:0.32", "ghz-alpha:0.1", "eberhard:0.3", "product2"] {
            let s = PureState::from_name(name).unwrap();
            let n: f64 = s.amplitudes().iter().map(|a| a.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12, "{name}");
        }
        assert!(PureState::from_name("bell").is_err());
        assert!(PureState::from_name("ghz-rot:x").is_err());
    }

    #[test]
    fn rejects_bad_vectors_and_states() {
        assert!(BlochVector::new(1.0, 1.0, 0.0).is_err());
        assert!(PureState::new(vec![Complex64::new(1.0, 0.0); 4]).is_err());
        assert!(PureState::new(vec![Complex64::new(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn frame_prefix_and_validation() {
        let f = MeasurementFrame::new(vec![vec![BlochVector::x(), BlochVector::z()], vec![BlochVector::y()]]).unwrap();
        assert_eq!(f.settings_per_party(), vec![2, 1]);
        assert_eq!(f.prefix(&[1, 1]).unwrap().party(0), &[BlochVector::x()]);
        assert!(f.prefix(&[3, 1]).is_err());
        assert!(MeasurementFrame::new(vec![vec![], vec![BlochVector::x()]]).is_err());
    }
}
