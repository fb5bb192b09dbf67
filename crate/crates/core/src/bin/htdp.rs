use std::process::exit;

fn main() {
    exit(htdp_core::cli::run(std::env::args_os()));
}
