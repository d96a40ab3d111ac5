fn main() {
    std::process::exit(banach_ustat::cli::run(std::env::args_os()));
}
