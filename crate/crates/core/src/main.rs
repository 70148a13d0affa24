fn main() {
    std::process::exit(voxclust::cli::main());
}
