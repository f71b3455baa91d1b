//! Prints per-block parameter tallies for every architecture as Markdown.

use timeconv::{build_network, ArchId, Network, Rng};

fn main() {
    for arch in ArchId::ALL {
        let net: Network = build_network(arch, &mut Rng::new(0));
        println!("### {arch}\n");
        println!("| block | learnable | running stats | total |");
        println!("|---|---:|---:|---:|");
        for b in net.block_counts() {
            println!("| {} | {} | {} | {} |", b.block, b.learnable, b.running, b.learnable + b.running);
        }
        println!(
            "| **all** | {} | {} | {} |\n",
            net.count_params(),
            net.count_params_with_running_stats() - net.count_params(),
            net.count_params_with_running_stats()
        );
    }
}
