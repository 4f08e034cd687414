"""Brute-force valid-policy-tree simulator used as an independent oracle.

Operates on plain dotted-OID strings and a flat node table (id -> row)
rather than the product's linked tree, re-deriving reachability by scanning.
Implements the same chain-step semantics: grow children from asserted
policies (with the anyPolicy wildcard), null the tree when a certificate
asserts no policies, rewrite or delete on policy mappings depending on the
mapping counter, prune, decrement counters for non-self-issued
certificates, and fold in per-certificate constraints.
"""

ANY = "2.5.29.32.0"


def _arcs(oid: str):
    return tuple(int(a) for a in oid.split("."))


class PolicySimulator:
    def __init__(self, acceptable, explicit_flag, inhibit_flag, chain_length):
        self.acceptable = frozenset(acceptable)
        unlimited = chain_length + 1
        self.explicit = 0 if explicit_flag else unlimited
        self.mapping = 0 if inhibit_flag else unlimited
        self.depth = 0
        self.applied = []
        # id -> [depth, policy, expected(frozenset), parent_id]
        self.rows = {0: [0, ANY, frozenset({ANY}), None]}
        self._next = 1

    # -- table plumbing ------------------------------------------------------

    def _add(self, depth, policy, expected, parent):
        self.rows[self._next] = [depth, policy, frozenset(expected), parent]
        self._next += 1

    def _at(self, depth):
        return [i for i, r in self.rows.items() if r[0] == depth]

    def _children(self, node_id):
        return [i for i, r in self.rows.items() if r[3] == node_id]

    def _delete_subtree(self, node_id):
        for child in self._children(node_id):
            self._delete_subtree(child)
        del self.rows[node_id]

    def _prune(self, leaf_depth):
        changed = True
        while changed:
            changed = False
            for i in list(self.rows):
                if self.rows[i][0] < leaf_depth and not self._children(i):
                    del self.rows[i]
                    changed = True

    # -- chain steps ---------------------------------------------------------

    def step(self, policies, mappings, constraints, self_issued):
        depth = self.depth + 1
        if self.rows:
            if policies is None:
                self.rows = {}
            else:
                self._assert_policies(policies, depth)
        if self.rows and mappings:
            self._map(mappings, depth)
        if not self_issued:
            if self.explicit > 0:
                self.explicit -= 1
            if self.mapping > 0:
                self.mapping -= 1
        if constraints is not None:
            rep, ipm = constraints
            if rep is not None:
                self.explicit = min(self.explicit, rep)
            if ipm is not None:
                self.mapping = min(self.mapping, ipm)
        self.depth = depth

    def _assert_policies(self, policies, depth):
        parents = self._at(depth - 1)
        for policy in policies:
            if policy == ANY:
                continue
            hit = False
            for parent in parents:
                if policy in self.rows[parent][2]:
                    self._add(depth, policy, {policy}, parent)
                    hit = True
            if not hit:
                for parent in parents:
                    if self.rows[parent][1] == ANY:
                        self._add(depth, policy, {policy}, parent)
        if ANY in policies:
            for parent in parents:
                present = {self.rows[c][1] for c in self._children(parent)}
                for value in sorted(self.rows[parent][2], key=_arcs):
                    if value not in present:
                        self._add(depth, value, {value}, parent)
        self._prune(depth)
        if not self._at(depth):
            self.rows = {}

    def _map(self, mappings, depth):
        groups = {}
        for idp, sdp in mappings:
            groups.setdefault(idp, set()).add(sdp)
        if self.mapping > 0:
            level = self._at(depth)
            for idp in sorted(groups, key=_arcs):
                sdps = groups[idp]
                hits = [i for i in level if self.rows[i][1] == idp]
                if hits:
                    for i in hits:
                        self.rows[i][2] = frozenset(sdps)
                elif any(self.rows[i][1] == ANY for i in level):
                    for parent in self._at(depth - 1):
                        if self.rows[parent][1] == ANY:
                            self._add(depth, idp, sdps, parent)
                else:
                    continue
                self.applied.extend((idp, sdp)
                                    for sdp in sorted(sdps, key=_arcs))
        else:
            for i in self._at(depth):
                if self.rows[i][1] in groups:
                    self._delete_subtree(i)
            self._prune(depth)
            if not self._at(depth):
                self.rows = {}

    # -- wrap-up -------------------------------------------------------------

    def tree_paths(self):
        if not self.rows:
            return frozenset()
        paths = []
        for i, row in self.rows.items():
            if not self._children(i):
                path = []
                walk = i
                while walk is not None:
                    r = self.rows[walk]
                    path.append((r[1], r[2]))
                    walk = r[3]
                paths.append(tuple(reversed(path)))
        return frozenset(paths)

    def finish(self):
        user_any = not self.acceptable
        user = self.acceptable if self.acceptable else frozenset({ANY})
        rows = {i: list(r) for i, r in self.rows.items()}
        sim = self  # deletion helpers below work on the copy

        def children(table, node_id):
            return [i for i, r in table.items() if r[3] == node_id]

        def delete_subtree(table, node_id):
            for child in children(table, node_id):
                delete_subtree(table, child)
            del table[node_id]

        def prune(table, leaf_depth):
            changed = True
            while changed:
                changed = False
                for i in list(table):
                    if table[i][0] < leaf_depth and not children(table, i):
                        del table[i]
                        changed = True

        if rows and not user_any:
            for i in list(rows):
                if i not in rows:
                    continue
                parent = rows[i][3]
                if parent is not None and rows.get(parent, [None, None])[1] == ANY \
                        and rows[i][1] != ANY and rows[i][1] not in user:
                    delete_subtree(rows, i)
            node_set = {r[1] for i, r in rows.items()
                        if r[3] is not None and rows[r[3]][1] == ANY
                        and r[1] != ANY}
            any_leaves = [i for i, r in rows.items()
                          if r[0] == sim.depth and r[1] == ANY]
            fresh = max(rows, default=0) + 1
            for leaf in any_leaves:
                parent = rows[leaf][3]
                for policy in sorted(user, key=_arcs):
                    if policy not in node_set:
                        rows[fresh] = [sim.depth, policy,
                                       frozenset({policy}), parent]
                        node_set.add(policy)
                        fresh += 1
                delete_subtree(rows, leaf)
            prune(rows, sim.depth)

        ok = self.explicit > 0 or bool(rows)
        if not rows:
            authorized = frozenset()
        elif user_any:
            authorized = frozenset(r[1] for r in rows.values()
                                   if r[0] == sim.depth)
        else:
            authorized = frozenset(
                r[1] for i, r in rows.items()
                if r[3] is not None and rows[r[3]][1] == ANY and r[1] != ANY)
        return {
            "ok": ok,
            "authorized": authorized,
            "applied": tuple(self.applied),
        }


def simulate(chain_steps, acceptable, explicit_flag, inhibit_flag):
    """Run the simulator over plain chain data.

    chain_steps: list of (policies or None, mappings, constraints,
    self_issued) tuples using dotted-OID strings."""
    sim = PolicySimulator(acceptable, explicit_flag, inhibit_flag,
                          len(chain_steps))
    for policies, mappings, constraints, self_issued in chain_steps:
        sim.step(policies, mappings, constraints, self_issued)
    result = sim.finish()
    result["tree"] = sim.tree_paths()
    return result
