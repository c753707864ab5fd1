fn main() {
    println!("cetlab CLI placeholder");
}
