fn main() {
    println!("selfsim");
}
