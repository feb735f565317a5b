fn main() {
    std::process::exit(lrnn_core::harness::cli_main(std::env::args_os()));
}
