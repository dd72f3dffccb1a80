//! The chapters of `book/` as doc-tests, so every snippet in the guide is
//! compiled and run by `cargo test`.

macro_rules! chapters {
    ($($name:ident => $file:literal),* $(,)?) => {
        $(
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            pub mod $name {}
        )*
    };
}

chapters! {
    introduction => "introduction.md",
    model => "model.md",
    simulation => "simulation.md",
    arch => "arch.md",
    pair_approximation => "pair_approximation.md",
    moments => "moments.md",
    two_plane => "two_plane.md",
    oracle => "oracle.md",
    cli => "cli.md",
}
