#pragma once

// Occluded-object reconstruction with a conditional GAN: tensor autodiff
// core, U-Net generator and conditional discriminator, training loop,
// procedural corpus, overlay compositing and evaluation.

#include "adam.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "gradcheck.hpp"
#include "image.hpp"
#include "losses.hpp"
#include "networks.hpp"
#include "occlusion.hpp"
#include "ops.hpp"
#include "overlay.hpp"
#include "params.hpp"
#include "rng.hpp"
#include "scene.hpp"
#include "tensor.hpp"
#include "training.hpp"
