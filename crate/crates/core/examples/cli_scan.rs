//! Drive the command-line front end in-process.

fn main() {
    let args = ["nlglass", "scan", "--alpha-min", "1.2", "--alpha-max", "1.3", "--beta-points", "4"];
    let code = nlglass::cli::run(args, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
