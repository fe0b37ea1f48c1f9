fn main() {
    std::process::exit(dnnr::cli::main());
}
