#pragma once

#include "rbcml/errors.hpp"
#include "rbcml/rng.hpp"
#include "rbcml/numerics.hpp"
#include "rbcml/model.hpp"
#include "rbcml/sampling.hpp"
#include "rbcml/breaking.hpp"
#include "rbcml/cml.hpp"
#include "rbcml/parallel.hpp"
#include "rbcml/consistency.hpp"
#include "rbcml/adaptive.hpp"
#include "rbcml/specs.hpp"
#include "rbcml/eval.hpp"
#include "rbcml/experiment_config.hpp"
