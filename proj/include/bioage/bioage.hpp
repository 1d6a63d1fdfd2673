#ifndef BIOAGE_BIOAGE_HPP
#define BIOAGE_BIOAGE_HPP

#include "bioage/compare.hpp"
#include "bioage/config.hpp"
#include "bioage/densities.hpp"
#include "bioage/errors.hpp"
#include "bioage/ibm.hpp"
#include "bioage/io.hpp"
#include "bioage/model.hpp"
#include "bioage/moments.hpp"
#include "bioage/pde.hpp"
#include "bioage/rng.hpp"
#include "bioage/runner.hpp"
#include "bioage/signed_log.hpp"

#endif
