fn main() { std::process::exit(riesz_score::cli::main()) }
