#pragma once

#include "core.hpp"
#include "errors.hpp"
#include "fixtures.hpp"
#include "gibbs.hpp"
#include "gibbs_spec.hpp"
#include "instance.hpp"
#include "learn.hpp"
#include "mmw.hpp"
#include "oracle.hpp"
#include "orsim.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "violation.hpp"
