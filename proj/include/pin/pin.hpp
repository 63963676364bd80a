#pragma once

// Umbrella header for the PIN library.

#include "pin/activations.hpp"
#include "pin/adam.hpp"
#include "pin/dataset.hpp"
#include "pin/embedding.hpp"
#include "pin/error.hpp"
#include "pin/gradients.hpp"
#include "pin/importance.hpp"
#include "pin/matrix.hpp"
#include "pin/model.hpp"
#include "pin/poisson.hpp"
#include "pin/rng.hpp"
#include "pin/schema.hpp"
#include "pin/serialize.hpp"
#include "pin/shap.hpp"
#include "pin/synth.hpp"
#include "pin/training.hpp"
#include "pin/version.hpp"
