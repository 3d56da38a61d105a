import init, { rateCurve, wernerSi, simulate } from "./pkg/svqkd_demo.js";

const PAD = 40;

function plot(canvas, series, yMax, guides) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height;
  const x = (v) => PAD + v * (w - 2 * PAD);
  const y = (s) => h - PAD - (s / yMax) * (h - 2 * PAD);
  ctx.clearRect(0, 0, w, h);

  ctx.strokeStyle = "#888";
  ctx.fillStyle = "#444";
  ctx.font = "12px sans-serif";
  ctx.beginPath();
  ctx.moveTo(PAD, PAD / 2);
  ctx.lineTo(PAD, h - PAD);
  ctx.lineTo(w - PAD / 2, h - PAD);
  ctx.stroke();
  for (const t of [0, 0.25, 0.5, 0.75, 1]) {
    ctx.fillText(t.toFixed(2), x(t) - 10, h - PAD + 16);
  }
  ctx.fillText("v", w - PAD / 2 - 6, h - PAD + 16);
  ctx.fillText(yMax.toFixed(1), 4, y(yMax) + 4);

  for (const g of guides) {
    ctx.strokeStyle = g.color;
    ctx.setLineDash([5, 4]);
    ctx.beginPath();
    if (g.vertical !== undefined) {
      ctx.moveTo(x(g.vertical), PAD / 2);
      ctx.lineTo(x(g.vertical), h - PAD);
    } else {
      ctx.moveTo(PAD, y(g.level));
      ctx.lineTo(w - PAD / 2, y(g.level));
    }
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = g.color;
    const lx = g.vertical !== undefined ? x(g.vertical) + 4 : PAD + 4;
    const ly = g.vertical !== undefined ? PAD : y(g.level) - 4;
    ctx.fillText(g.label, lx, ly);
  }

  ctx.strokeStyle = "#1f5fbf";
  ctx.lineWidth = 2;
  ctx.beginPath();
  series.forEach(([v, s], i) => (i === 0 ? ctx.moveTo(x(v), y(s)) : ctx.lineTo(x(v), y(s))));
  ctx.stroke();
  ctx.lineWidth = 1;
}

function drawRate() {
  const points = Number(document.getElementById("rate-points").value);
  const data = JSON.parse(rateCurve(points));
  document.getElementById("rate-threshold").textContent =
    `rate is positive above v = ${data.threshold.toFixed(6)}`;
  plot(
    document.getElementById("rate-plot"),
    data.rows.map((r) => [r.v, r.r_dw]),
    1,
    [{ vertical: data.threshold, label: "threshold", color: "#b5651d" }],
  );
}

function drawSi() {
  const n = Number(document.getElementById("si-parties").value);
  const data = JSON.parse(wernerSi(n, 200));
  plot(
    document.getElementById("si-plot"),
    data.rows.map((r) => [r.v, r.si]),
    data.quantum_max * 1.05,
    [
      { level: data.classical_bound, label: "classical bound", color: "#a3201b" },
      { level: data.quantum_max, label: "quantum maximum", color: "#16702e" },
    ],
  );
}

function runSession() {
  const out = document.getElementById("sim-out");
  const num = (id) => Number(document.getElementById(id).value);
  try {
    const r = JSON.parse(simulate(num("sim-parties"), num("sim-rounds"), num("sim-v"), BigInt(num("sim-seed"))));
    const verdict = r.accepted ? "accepted" : "aborted";
    out.innerHTML =
      `<span class="${verdict}">${verdict}</span>\n` +
      `SI estimate     ${r.si === null ? "n/a" : r.si.toFixed(4) + " +/- " + r.stderr.toFixed(4)}\n` +
      `classical bound ${r.classical_bound}\n` +
      `quantum maximum ${r.quantum_max.toFixed(4)}\n` +
      `key mismatch    ${r.key_mismatch === null ? "n/a" : r.key_mismatch.toFixed(4)}`;
  } catch (e) {
    out.textContent = `error: ${e.message ?? e}`;
  }
}

await init();
document.getElementById("rate-points").addEventListener("input", drawRate);
document.getElementById("si-parties").addEventListener("change", drawSi);
document.getElementById("sim-run").addEventListener("click", runSession);
drawRate();
drawSi();
