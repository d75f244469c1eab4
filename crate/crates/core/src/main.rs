fn main() {
    std::process::exit(svs_tessellate::cli::main_with_args(std::env::args_os()));
}
