//! Dense Hermitian eigensolver backed by LAPACK (`dsyevd` / `zheevd`).

use num_complex::Complex64;

/// Column-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for col in 0..n {
            for row in 0..n {
                data.push(f(row, col));
            }
        }
        Self { n, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[col * self.n + row]
    }

    /// Largest |H_ij − conj(H_ji)|.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..=i {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|v| v.im == 0.0)
    }

    /// y = H·x
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        for (col, &xc) in x.iter().enumerate() {
            if xc == Complex64::new(0.0, 0.0) {
                continue;
            }
            let column = &self.data[col * self.n..(col + 1) * self.n];
            for (yi, h) in y.iter_mut().zip(column) {
                *yi += h * xc;
            }
        }
        y
    }
}

/// Eigenvalues ascending; `vectors[k]` is the k-th unit eigenvector.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
}

/// Diagonalizes a Hermitian matrix. Returns `None` if LAPACK reports failure.
pub fn eigh(h: &HermitianMatrix) -> Option<Eigen> {
    if h.is_real() {
        eigh_real(h)
    } else {
        eigh_complex(h)
    }
}

fn eigh_real(h: &HermitianMatrix) -> Option<Eigen> {
    let n = h.n as i32;
    let mut a: Vec<f64> = h.data.iter().map(|v| v.re).collect();
    let mut w = vec![0.0; h.n];
    let mut info = 0;
    let mut work = vec![0.0; 1];
    let mut iwork = vec![0i32; 1];
    unsafe {
        lapack::dsyevd(
            b'V', b'L', n, &mut a, n, &mut w, &mut work, -1, &mut iwork, -1, &mut info,
        );
    }
    if info != 0 {
        return None;
    }
    let lwork = work[0] as i32;
    let liwork = iwork[0];
    let mut work = vec![0.0; lwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        lapack::dsyevd(
            b'V', b'L', n, &mut a, n, &mut w, &mut work, lwork, &mut iwork, liwork, &mut info,
        );
    }
    if info != 0 {
        return None;
    }
    let vectors = a
        .chunks(h.n)
        .map(|c| c.iter().map(|&v| Complex64::new(v, 0.0)).collect())
        .collect();
    Some(Eigen { values: w, vectors })
}

fn eigh_complex(h: &HermitianMatrix) -> Option<Eigen> {
    let n = h.n as i32;
    let mut a = h.data.clone();
    let mut w = vec![0.0; h.n];
    let mut info = 0;
    let mut work = vec![Complex64::new(0.0, 0.0); 1];
    let mut rwork = vec![0.0; 1];
    let mut iwork = vec![0i32; 1];
    unsafe {
        lapack::zheevd(
            b'V', b'L', n, &mut a, n, &mut w, &mut work, -1, &mut rwork, -1, &mut iwork, -1,
            &mut info,
        );
    }
    if info != 0 {
        return None;
    }
    let lwork = work[0].re as i32;
    let lrwork = rwork[0] as i32;
    let liwork = iwork[0];
    let mut work = vec![Complex64::new(0.0, 0.0); lwork as usize];
    let mut rwork = vec![0.0; lrwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        lapack::zheevd(
            b'V', b'L', n, &mut a, n, &mut w, &mut work, lwork, &mut rwork, lrwork, &mut iwork,
            liwork, &mut info,
        );
    }
    if info != 0 {
        return None;
    }
    let vectors = a.chunks(h.n).map(|c| c.to_vec()).collect();
    Some(Eigen { values: w, vectors })
}
