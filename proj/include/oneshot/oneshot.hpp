// Everything in one include.
#pragma once

#include "oneshot/error.hpp"
#include "oneshot/linalg.hpp"
#include "oneshot/quantum.hpp"
#include "oneshot/rng.hpp"
#include "oneshot/parallel.hpp"
#include "oneshot/sdp.hpp"
#include "oneshot/entropy.hpp"
#include "oneshot/split.hpp"
#include "oneshot/covering.hpp"
#include "oneshot/hash.hpp"
#include "oneshot/cdcqsi.hpp"
#include "oneshot/compression.hpp"
#include "oneshot/region.hpp"
#include "oneshot/centralised.hpp"
#include "oneshot/instance.hpp"
