use madelung::diffusion::{self, SmoluchowskiOptions};
use madelung::field::DensityField;
use madelung::grid::{Boundary, Grid1D};
use madelung::oracle;
use madelung::potential::PotentialSpec;
use madelung::*;

fn main() {
    // criterion-2 n-scaling: PDE vs ODE deficit at t=1.5 (relative)
    let params = PhysicalParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
    let pot = PotentialSpec::free();
    let t0 = 0.5;
    let s0 = oracle::free_quantum_dispersion(t0, &params).unwrap();
    for n in [256usize, 512, 1024] {
        let grid = Grid1D::new(-11.0, 11.0, n, Boundary::Periodic).unwrap();
        let rho0 = DensityField::gaussian(0.0, s0, &grid).unwrap();
        let opts = SmoluchowskiOptions { t_max: 1.5, dt: None, checkpoints: 3 };
        let (series, _) = diffusion::evolve_smoluchowski(&rho0, &params, &pot, opts).unwrap();
        let s_end = *series.sigma2.last().unwrap();
        let t_end = *series.times.last().unwrap();
        let ode = oracle::rk4_scalar(|_, y| diffusion::gaussian_sigma_ode_rhs(y, &params, &pot).unwrap(), s0, 0.0, t_end, 4000);
        println!("n={n}: t={:.3} pde={s_end:.6} ode={ode:.6} rel={:+.3e}", t0+t_end, (s_end-ode)/ode);
    }
}
