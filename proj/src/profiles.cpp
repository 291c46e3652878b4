#include "pfeddl/profiles.hpp"

namespace pfeddl::profiles {

io::SyntheticSpec quickstart_spec() {
  io::SyntheticSpec spec;
  spec.d = 64;
  spec.k_true = 16;
  spec.g_true = 10;
  spec.sites = 4;
  spec.samples_per_site = {150, 150, 150, 150};
  spec.sparsity = 3;
  spec.noise_std = 0.01;
  spec.margin = 0.1;
  spec.seed = 0;
  return spec;
}

Hyperparams quickstart_hyperparams() {
  Hyperparams h;
  h.lambda1 = 1.0;
  h.lambda2 = 0.05;
  h.lambda3 = 0.01;
  h.lambda4 = 0.01;
  h.eta = 0.01;
  h.k = 16;
  h.g = 10;
  h.iters_local = 20;
  h.iters_fed = 50;
  h.iters_pretrain = 1000;
  return h;
}

}  // namespace pfeddl::profiles
