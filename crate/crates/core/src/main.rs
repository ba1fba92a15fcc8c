fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(palletbench::cli::run(&args));
}
