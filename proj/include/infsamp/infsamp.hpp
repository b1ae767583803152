// SPDX-License-Identifier: Apache-2.0
//! \file infsamp/infsamp.hpp
//! Umbrella header (everything except I/O).
#ifndef INFSAMP_INFSAMP_HPP
#define INFSAMP_INFSAMP_HPP

#include "design.hpp"
#include "error.hpp"
#include "estimators.hpp"
#include "esw.hpp"
#include "linalg.hpp"
#include "montecarlo.hpp"
#include "population.hpp"
#include "rng.hpp"
#include "sample_model.hpp"

#endif  // INFSAMP_INFSAMP_HPP
