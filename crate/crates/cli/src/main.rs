fn main() {
    std::process::exit(emllm_cli::run(std::env::args_os()));
}
