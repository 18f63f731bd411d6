import init, {
  muToEpsilon,
  calibrateSigma,
  tradeoffCurve,
  simulateAudit,
  miniPipeline,
} from "./pkg/dp_audit_wasm.js";

const WITHOUT = "#3b6fb6";
const WITH = "#d2691e";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const fmt = (x, digits = 4) => (Number.isFinite(x) ? x.toFixed(digits) : String(x));

function clear(ctx) {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
}

function drawCurve(canvas, points, mu) {
  const ctx = canvas.getContext("2d");
  const pad = 36;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  clear(ctx);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w, h);
  ctx.setLineDash([4, 4]);
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad + w, pad + h);
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.strokeStyle = WITH;
  ctx.lineWidth = 2;
  ctx.beginPath();
  for (let i = 0; i < points.length; i += 2) {
    const x = pad + points[i] * w;
    const y = pad + (1 - points[i + 1]) * h;
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  }
  ctx.stroke();
  ctx.lineWidth = 1;
  ctx.fillStyle = "#222";
  ctx.fillText("type I error α", pad + w / 2 - 35, canvas.height - 10);
  ctx.save();
  ctx.translate(12, pad + h / 2 + 40);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText("type II error β", 0, 0);
  ctx.restore();
  ctx.fillText(`μ = ${mu}`, pad + w - 60, pad + 16);
}

function drawHistogram(canvas, view, title) {
  const ctx = canvas.getContext("2d");
  const edges = view.binEdges;
  const a = view.countsWithout;
  const b = view.countsWith;
  const pad = 30;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  const top = Math.max(1, ...a, ...b);
  const lo = edges[0];
  const span = edges[edges.length - 1] - lo || 1;
  const bar = w / a.length;
  clear(ctx);
  ctx.globalAlpha = 0.55;
  for (let i = 0; i < a.length; i++) {
    ctx.fillStyle = WITHOUT;
    ctx.fillRect(pad + i * bar, pad + h * (1 - a[i] / top), bar - 1, (h * a[i]) / top);
    ctx.fillStyle = WITH;
    ctx.fillRect(pad + i * bar, pad + h * (1 - b[i] / top), bar - 1, (h * b[i]) / top);
  }
  ctx.globalAlpha = 1;
  const tx = pad + ((view.tau - lo) / span) * w;
  if (tx >= pad && tx <= pad + w) {
    ctx.strokeStyle = "#222";
    ctx.beginPath();
    ctx.moveTo(tx, pad);
    ctx.lineTo(tx, pad + h);
    ctx.stroke();
  }
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#222";
  ctx.fillText(title, pad, pad - 10);
  ctx.fillText(fmt(lo, 3), pad, pad + h + 16);
  ctx.fillText(fmt(lo + span, 3), pad + w - 40, pad + h + 16);
}

function drawPixels(canvas, pixels) {
  const ctx = canvas.getContext("2d");
  const side = Math.round(Math.sqrt(pixels.length));
  const cell = canvas.width / side;
  clear(ctx);
  for (let i = 0; i < pixels.length; i++) {
    const v = Math.round(255 * pixels[i]);
    ctx.fillStyle = `rgb(${v},${v},${v})`;
    ctx.fillRect((i % side) * cell, Math.floor(i / side) * cell, cell, cell);
  }
}

function summary(view) {
  return (
    `ε_emp ${fmt(view.epsEmp)}   μ_emp ${fmt(view.muEmp)}   ` +
    `τ ${fmt(view.tau)} (${view.direction})   FPR̄ ${fmt(view.fprBar)}   FNR̄ ${fmt(view.fnrBar)}`
  );
}

function guarded(out, f) {
  return () => {
    try {
      f();
    } catch (e) {
      $(out).textContent = `error: ${e.message ?? e}`;
    }
  };
}

function runAccounting() {
  const mu = num("acc-mu");
  const delta = num("acc-delta");
  const steps = num("acc-steps");
  const eps = muToEpsilon(mu, delta);
  const sigma = calibrateSigma(eps, delta, steps);
  $("acc-out").textContent =
    `μ = ${mu} gives ε = ${fmt(eps)} at δ = ${delta}\n` +
    `reaching it in T = ${steps} full-batch steps needs σ = ${fmt(sigma)}`;
  drawCurve($("acc-plot"), tradeoffCurve(mu, 101), mu);
}

function runSimulation() {
  const view = simulateAudit(num("sim-shift"), num("sim-n"), num("sim-alpha"), 1e-5, num("sim-seed"));
  $("sim-out").textContent = `${view.note}\n${summary(view)}`;
  drawHistogram($("sim-plot"), view, "observed losses");
  view.free();
}

function runPipeline() {
  $("pipe-out").textContent = "training…";
  setTimeout(
    guarded("pipe-out", () => {
      const started = performance.now();
      const result = miniPipeline(
        num("pipe-eps"),
        num("pipe-n"),
        $("pipe-obj").value,
        num("pipe-steps"),
        num("pipe-seed"),
      );
      const canary = result.takeCanary();
      const crafted = result.takeCrafted();
      const seconds = ((performance.now() - started) / 1000).toFixed(1);
      $("pipe-out").textContent =
        `σ = ${fmt(result.sigma)}, ${seconds}s\n` +
        `canary   ${summary(canary)}\n` +
        `crafted  ${summary(crafted)}\n${crafted.note}`;
      drawHistogram($("pipe-canary"), canary, "canary");
      drawHistogram($("pipe-crafted"), crafted, "crafted");
      drawPixels($("pipe-pixels"), result.craftedPixels);
      canary.free();
      crafted.free();
      result.free();
    }),
    10,
  );
}

await init();
$("status").textContent = "";
$("acc-run").onclick = guarded("acc-out", runAccounting);
$("sim-run").onclick = guarded("sim-out", runSimulation);
$("pipe-run").onclick = runPipeline;
guarded("acc-out", runAccounting)();
guarded("sim-out", runSimulation)();
