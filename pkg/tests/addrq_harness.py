"""Cycle-by-cycle driver for the address-queue model, with frozen scenario tables.

A script is a list of cycles; each cycle may enqueue an address, signal a
dequeue, present a check address and set whether the check output is taken
downstream.  Each observed row is ``(check_out, check_taken, enq_taken,
queue_after)``.  The expected rows below were worked out by hand.
"""

from rhls.ir import VALUE, ENode, state
from rhls.sim import _AddrQueue

ENQ, DEQ, CHK, OUT = 0, 1, 2, 3


class _Stub:
    def on_dequeue(self, q, cycle):
        pass


def make_queue(capacity=8, same_cycle_check=True) -> _AddrQueue:
    n = ENode(0, "ADDR_Q", [VALUE, state("a"), VALUE], [VALUE], [None, None, None],
              {"store": 1, "load": 2, "capacity": capacity,
               "same_cycle_check": same_cycle_check})
    return _AddrQueue(_Stub(), n, [ENQ, DEQ, CHK], [OUT])


def step(q: _AddrQueue, cycle: int, enq=None, deq=False, chk=None, out_ready=True):
    offer = [enq, 0 if deq else None, chk, None]
    accept = [False] * 4
    q.forward(offer)
    q.ready(offer, accept)
    accept[OUT] = out_ready
    q.backward(offer, accept)
    row = (offer[OUT], bool(accept[CHK] and chk is not None),
           bool(accept[ENQ] and enq is not None))
    q.commit(offer, accept, cycle)
    return row + (list(q.q),)


def run_script(script, capacity=8, same_cycle_check=True):
    q = make_queue(capacity, same_cycle_check)
    return [step(q, c, **cyc) for c, cyc in enumerate(script)]


SCENARIOS = {
    "empty_queue_pass": (
        [{"chk": 5}],
        [(5, True, False, [])],
        {}),
    "conflict_blocks_until_dequeue": (
        [{"enq": 7}, {"chk": 7}, {"chk": 7}, {"deq": True, "chk": 7}, {"chk": 7}],
        [(None, False, True, [7]),
         (None, False, False, [7]),
         (None, False, False, [7]),
         (None, False, False, []),  # a dequeue frees the entry only next cycle
         (7, True, False, [])],
        {}),
    "other_address_passes": (
        [{"enq": 7}, {"chk": 8}],
        [(None, False, True, [7]), (8, True, False, [7])],
        {}),
    "same_cycle_enqueue_conflict": (
        [{"enq": 9, "chk": 9}, {"chk": 9}, {"deq": True, "chk": 9}, {"chk": 9}],
        [(None, False, True, [9]),
         (None, False, False, [9]),
         (None, False, False, []),
         (9, True, False, [])],
        {}),
    "same_cycle_enqueue_other_address": (
        [{"enq": 9, "chk": 4}],
        [(4, True, True, [9])],
        {}),
    "same_cycle_compare_disabled": (
        [{"enq": 9, "chk": 9}],
        [(9, True, True, [9])],
        {"same_cycle_check": False}),
    "full_queue_refuses_enqueue": (
        [{"enq": 1}, {"enq": 2}, {"enq": 3}, {"deq": True, "enq": 3}, {"enq": 3}],
        [(None, False, True, [1]),
         (None, False, True, [1, 2]),
         (None, False, False, [1, 2]),
         (None, False, False, [2]),
         (None, False, True, [2, 3])],
        {"capacity": 2}),
    "passed_check_stays_valid": (
        [{"chk": 5, "out_ready": False}, {"enq": 5, "chk": 5, "out_ready": False}, {"chk": 5}],
        [(5, False, False, []), (5, False, True, [5]), (5, True, False, [5])],
        {}),
}
