#pragma once

#include "bsgan/checkpoint.hpp"
#include "bsgan/config.hpp"
#include "bsgan/gradcheck.hpp"
#include "bsgan/impipe.hpp"
#include "bsgan/metrics.hpp"
#include "bsgan/models.hpp"
#include "bsgan/nn.hpp"
#include "bsgan/optim.hpp"
#include "bsgan/pipeline.hpp"
#include "bsgan/tensor.hpp"
#include "bsgan/theory.hpp"
#include "bsgan/training.hpp"
#include "bsgan/wavelet.hpp"
