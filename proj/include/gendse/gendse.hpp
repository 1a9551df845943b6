#ifndef GENDSE_GENDSE_HPP
#define GENDSE_GENDSE_HPP

#include "gendse/types.hpp"
#include "gendse/dynamics.hpp"
#include "gendse/io.hpp"
#include "gendse/measurement.hpp"
#include "gendse/attacks.hpp"
#include "gendse/cubature.hpp"
#include "gendse/estimators.hpp"
#include "gendse/evaluation.hpp"
#include "gendse/config.hpp"
#include "gendse/pipeline.hpp"

#endif  // GENDSE_GENDSE_HPP
