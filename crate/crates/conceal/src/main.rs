fn main() {
    std::process::exit(fse_conceal::cli::run(std::env::args_os()));
}
