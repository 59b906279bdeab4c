fn main() {
    std::process::exit(sda_netlab_cli::run(std::env::args_os()));
}
