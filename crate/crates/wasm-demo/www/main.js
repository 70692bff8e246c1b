// Built with: wasm-pack build crates/wasm-demo --target web --out-dir www/pkg
import init, { ahpExplore, hundredDollar, mergeRankings } from "./pkg/reqagent_wasm.js";

function table(headers, rows) {
  const t = document.createElement("table");
  const head = t.insertRow();
  for (const h of headers) {
    const th = document.createElement("th");
    th.textContent = h;
    head.appendChild(th);
  }
  for (const row of rows) {
    const tr = t.insertRow();
    for (const cell of row) tr.insertCell().textContent = cell;
  }
  return t;
}

const fmt = (x, digits = 4) => (typeof x === "number" ? Number(x.toFixed(digits)).toString() : String(x));

function renderAhp(out, r) {
  out.append(table(["item", "weight"], r.items.map((id, i) => [id, fmt(r.weights[i])])));
  out.append(table(["story", "rank"], r.ranking.map((e) => [e.story_id, fmt(e.rank)])));
  const p = document.createElement("p");
  p.textContent = `λmax ${fmt(r.lambda_max)}, CI ${fmt(r.consistency_index)}, CR ${fmt(r.consistency_ratio)}: ` +
    (r.consistent ? "acceptable" : "inconsistent (CR above 0.10)");
  out.append(p);
}

function renderDollar(out, r) {
  out.append(table(["story", "score", "rank"], r.ranking.map((e) => [e.story_id, r.scores[e.story_id], fmt(e.rank)])));
}

function renderMerge(out, r) {
  out.append(table(["story", "merged rank"], r.borda.map((e) => [e.story_id, fmt(e.rank)])));
  if (!r.consistency) return;
  const c = r.consistency;
  out.append(table(["", ...c.sources], c.sources.map((s, i) => [s, ...c.distances[i].map((d) => fmt(d))])));
  const modal = Object.entries(c.modal.ranking.ranks).sort((a, b) => a[1] - b[1]);
  const p = document.createElement("p");
  p.textContent = `Modal ranking (${c.modal.method}, support ${c.modal.support}): ` +
    modal.map(([id, rank]) => `${id}=${fmt(rank)}`).join(", ");
  out.append(p);
}

function wire(id, op, render) {
  const section = document.getElementById(id);
  const input = section.querySelector("textarea");
  const out = section.querySelector(".out");
  const run = () => {
    out.replaceChildren();
    try {
      render(out, JSON.parse(op(input.value)));
    } catch (e) {
      const err = document.createElement("div");
      err.className = "error";
      err.textContent = e.message ?? String(e);
      out.append(err);
    }
  };
  section.querySelector("button").addEventListener("click", run);
  run();
}

await init();
wire("ahp", ahpExplore, renderAhp);
wire("dollar", hundredDollar, renderDollar);
wire("merge", mergeRankings, renderMerge);
