use clap::Parser;
use rdk_cli::{error_kind, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        let record = serde_json::json!({
            "error": { "kind": error_kind(&e), "message": format!("{e:#}") }
        });
        eprintln!("{record}");
        std::process::exit(1);
    }
}
