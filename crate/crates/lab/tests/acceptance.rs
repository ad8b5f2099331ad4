use lab::acceptance::run_all;
use lab::config::Config;

fn main() {
    let cfg = Config::default();
    let results = run_all(&cfg, &mut |c| println!("{}", c.line()));
    let failed = results.iter().filter(|c| !c.pass).count();
    println!("acceptance: {} passed, {} failed", results.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
