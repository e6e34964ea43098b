fn main() {
    std::process::exit(cxverb::run(std::env::args_os()));
}
