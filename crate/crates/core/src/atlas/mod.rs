//! Part B: a continuous atlas. A second hypernetwork maps the shape
//! embedding to the weights of a patch network φ, which takes a UV
//! coordinate together with a condition point `p` on the surface and
//! returns a point of the patch around `p`.

mod assemble;
mod discrete;
mod model;
mod train;

pub use assemble::{adaptive_fill, assemble_mesh, soup_patches, AssembleConfig, AssemblyMode, FillConfig, FillReport};
pub use discrete::{discrete_atlas, DiscreteAtlasBaseline, DiscreteAtlasConfig, DiscreteAtlasFit};
pub use model::{
    conditioned_batch, local_loss, neighborhood, phi_patch, ConditionedBatch, ModelB,
    ModelBConfig, Patch,
};
pub use train::{
    evaluate_local, local_grad_check, local_loss_grad, LocalEval, random_uv_samples, train_part_b, LocalGrad,
    NeighborSource, PatchSample, TrainBConfig, TrainBReport, TrainedB, UV_NEIGHBORS,
};
