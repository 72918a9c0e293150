#pragma once

#include "eattn/attention.hpp"
#include "eattn/dense.hpp"
#include "eattn/dynamics.hpp"
#include "eattn/energy.hpp"
#include "eattn/errors.hpp"
#include "eattn/heads.hpp"
#include "eattn/random.hpp"
#include "eattn/verify.hpp"
