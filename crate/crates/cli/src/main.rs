fn main() {
    let threads = std::env::var("DYNINT_THREADS").ok();
    std::process::exit(dynint::main_with(std::env::args_os(), threads.as_deref()));
}
