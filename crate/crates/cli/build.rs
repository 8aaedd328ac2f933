use std::process::Command;

fn main() {
    let describe = Command::new("git")
        .args(["describe", "--tags", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok());
    if let Some(d) = describe {
        println!("cargo:rustc-env=ACBPC_GIT_DESCRIBE={}", d.trim());
    }
    println!("cargo:rerun-if-changed=build.rs");
}
