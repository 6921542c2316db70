//! Recovers a sparse signal from sign measurements with sparse corruption.
//!
//! cargo run --release -p tlasso --example recover

use tlasso::experiments::SetTemplate;
use tlasso::solver::error_breakdown;
use tlasso::{generate_instance, link_params, solve_tlasso, InstanceSpec, LinkFunction, SolveOptions};

fn main() -> tlasso::Result<()> {
    let spec = InstanceSpec {
        n: 128,
        m: 1000,
        signal_sparsity: 4,
        corruption_sparsity: 4,
        corruption_amplitude: 5.0,
        link: LinkFunction::Sign,
        seed: 1,
    };
    let params = link_params(&spec.link, 256)?;
    let inst = generate_instance(&spec)?;

    // The estimator targets μx⋆, so the signal ball is sized to that.
    let anchor = &inst.x_star * params.mu;
    let set_x = SetTemplate::parse("l1:anchor")?.resolve(&anchor)?;
    let set_v = SetTemplate::parse("l1:anchor")?.resolve(&inst.v_star)?;
    let result = solve_tlasso(&inst, &set_x, &set_v, &SolveOptions::for_measurements(spec.m))?;
    let err = error_breakdown(&result.x_hat, &result.v_hat, &inst, params.mu)?;

    let cosine = result.x_hat.dot(&inst.x_star) / result.x_hat.dot(&result.x_hat).sqrt();
    println!("mu = {:.5}, sigma = {:.5}, psi = {:.5}", params.mu, params.sigma, params.psi_hat);
    println!("{} iterations, converged = {}", result.iterations, result.converged);
    println!(
        "signal error {:.4}, corruption error {:.4}, joint {:.4}",
        err.signal, err.corruption, err.joint
    );
    println!("cosine(x_hat, x_star) = {cosine:.5}");
    Ok(())
}
