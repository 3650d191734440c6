#pragma once

// Umbrella header for the WPFed simulation library.

#include "wpfed/adversary.hpp"
#include "wpfed/announce.hpp"
#include "wpfed/common.hpp"
#include "wpfed/data.hpp"
#include "wpfed/experiments.hpp"
#include "wpfed/lsh.hpp"
#include "wpfed/matrix.hpp"
#include "wpfed/model.hpp"
#include "wpfed/protocol.hpp"
#include "wpfed/ranking.hpp"
#include "wpfed/rng.hpp"
#include "wpfed/selection.hpp"
#include "wpfed/sha256.hpp"
#include "wpfed/simulation.hpp"
