#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gradcheck_util.hpp"

using namespace othx::nn;

TEST_CASE("gradient check: decoder-only, 1 layer, dim 8") {
  ModelConfig cfg;
  cfg.architecture = Arch::DecoderOnly;
  cfg.layers = 1;
  cfg.hidden_dim = 8;
  cfg.heads = 2;
  cfg.seed = 3;
  const double worst = gradcheck::max_group_rel_error(cfg, /*enc_dec=*/false, true);
  CHECK(worst < 1e-3);
}

TEST_CASE("gradient check: encoder-decoder, 1+1 layers, dim 8") {
  ModelConfig cfg;
  cfg.architecture = Arch::EncoderDecoder;
  cfg.layers = 1;
  cfg.hidden_dim = 8;
  cfg.heads = 2;
  cfg.seed = 4;
  const double worst = gradcheck::max_group_rel_error(cfg, /*enc_dec=*/true, true);
  CHECK(worst < 1e-3);
}

TEST_CASE("gradient check: decoder-only, 2 layers, 2 heads") {
  ModelConfig cfg;
  cfg.architecture = Arch::DecoderOnly;
  cfg.layers = 2;
  cfg.hidden_dim = 8;
  cfg.heads = 2;
  cfg.seed = 5;
  CHECK(gradcheck::max_group_rel_error(cfg, false) < 1e-3);
}
