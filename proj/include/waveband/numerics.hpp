#pragma once

#include "waveband/numerics/eigensolver.hpp"
#include "waveband/numerics/linear_solve.hpp"
#include "waveband/numerics/propagate.hpp"
#include "waveband/numerics/types.hpp"
