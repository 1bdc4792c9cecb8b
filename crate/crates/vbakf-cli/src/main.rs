fn main() {
    std::process::exit(vbakf_cli::run(std::env::args()));
}
