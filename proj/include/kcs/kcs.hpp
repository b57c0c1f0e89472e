#pragma once

#include "kcs/error.hpp"
#include "kcs/parallel.hpp"
#include "kcs/kernel.hpp"
#include "kcs/model.hpp"
#include "kcs/phase_grid.hpp"
#include "kcs/fft_convolution.hpp"
#include "kcs/fields.hpp"
#include "kcs/rng.hpp"
#include "kcs/particles.hpp"
#include "kcs/characteristics.hpp"
#include "kcs/profiles.hpp"
#include "kcs/grid_solver.hpp"
#include "kcs/diagnostics.hpp"
#include "kcs/simulation.hpp"
#include "kcs/experiments.hpp"
#include "kcs/config.hpp"
#include "kcs/snapshot.hpp"
#include "kcs/csv.hpp"
#include "kcs/plots.hpp"
#include "kcs/cli.hpp"
