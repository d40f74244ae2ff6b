use tfe_core::surface::Builtin;

pub fn run() {
    let blurbs = [
        ("radial", "degree 2; leaves are rays from the origin, fiber values in closed form"),
        ("villarceau:<s>", "degree 1; leaves are Villarceau circles on nested tori, scale s"),
        ("circles", "degree 2; leaves are circles in parallel planes"),
        ("rotsym", "degree 2; rotationally symmetric family with a branch circle"),
        ("cubic", "degree 3; fiber values only by root tracking, no closed form"),
    ];
    println!("built-in surfaces:");
    for (name, blurb) in blurbs {
        println!("  {name:<16} {blurb}");
    }
    debug_assert_eq!(blurbs.len(), Builtin::catalog().len());
    println!();
    println!("control fields (verify only, expected to fail):");
    println!("  {:<16} radial field plus a smooth perturbation; breaks the shear-free pairs", "radial-perturbed");
    println!("  {:<16} normalize(1, x2, 0); breaks the conformality residual", "sheared");
}
