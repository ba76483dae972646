import init, { fixtures, sampler_histogram, refinement, run_experiment } from "../pkg/solvorder_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function guarded(target, f) {
  try {
    f();
  } catch (e) {
    $(target).innerHTML = `<p class="error">${e}</p>`;
  }
}

function escape(s) {
  return String(s).replace(/[&<>]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;" })[c]);
}

function showHistogram() {
  const h = JSON.parse(sampler_histogram($("group").value, $("mode").value, num("epsilon"), num("draws"), num("sseed")));
  const max = Math.max(...h.bars.map((b) => b.count));
  const rows = h.bars
    .map((b) => `<tr><td>${escape(b.element)}</td><td>${b.count}</td>` +
      `<td><div class="bar" style="width:${(20 * b.count) / max}rem"></div></td></tr>`)
    .join("");
  $("histogram").innerHTML =
    `<p>|G| = ${h.order}, TV distance ${h.tv_distance.toFixed(4)}, chi-square ${h.chi_square.toFixed(1)}, ` +
    `${h.queries_per_draw.toFixed(1)} queries per draw</p><table>${rows}</table>`;
}

function showRefinement() {
  const v = JSON.parse(refinement($("group").value, $("rprimes").value));
  const table = (entries) =>
    "<table><tr><th>i</th><th>element</th><th>prime</th><th>m_i</th></tr>" +
    entries
      .map((e, i) => `<tr><td>${i + 1}</td><td>${escape(e.element)}</td><td>${e.prime ?? ""}</td><td>${e.quotient_order}</td></tr>`)
      .join("") +
    "</table>";
  $("refinement").innerHTML =
    `<p>|G| = ${v.order}, n = ${v.encoding_length}, primes ${v.primes.join(", ")}</p>` +
    `<h4>PCGS</h4>${table(v.pcgs)}<h4>Refined</h4>${table(v.refined)}`;
}

function showReport() {
  const r = JSON.parse(run_experiment($("group").value, $("protocol").value, $("prover").value,
    $("primes").value, num("trials"), num("repetitions"), num("seed")));
  const rate = (k) => {
    const x = r.rates[k];
    return `<tr><td>${k}</td><td>${r.counts[k]}</td><td>${x.rate.toFixed(4)}</td><td>[${x.low.toFixed(4)}, ${x.high.toFixed(4)}]</td></tr>`;
  };
  $("report").innerHTML =
    `<p>|G| = ${r.group_order}</p><table><tr><th>outcome</th><th>count</th><th>rate</th><th>95% interval</th></tr>` +
    ["correct_order", "wrong_order", "abort"].map(rate).join("") + "</table>" +
    `<pre>${escape(JSON.stringify({ abort_reasons: r.abort_reasons, wrong_orders: r.wrong_orders }, null, 2))}</pre>`;
}

await init();
for (const f of JSON.parse(fixtures())) {
  const o = document.createElement("option");
  o.value = f.spec;
  o.label = `${f.name} (order ${f.order})`;
  $("fixtures").append(o);
}
$("sample").onclick = () => guarded("histogram", showHistogram);
$("refine").onclick = () => guarded("refinement", showRefinement);
$("run").onclick = () => guarded("report", showReport);
