fn main() -> std::process::ExitCode {
    oam_transcoder::cli::main()
}
