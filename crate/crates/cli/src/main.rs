fn main() {
    println!("patc");
}
