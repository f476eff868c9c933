fn main() {
    println!("sollab: experiments not wired up yet");
}
