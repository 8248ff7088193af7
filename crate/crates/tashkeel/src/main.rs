//! Thin binary entry point; every command lives in [`tashkeel::cli`].

fn main() {
    std::process::exit(tashkeel::cli::run(std::env::args_os()));
}
