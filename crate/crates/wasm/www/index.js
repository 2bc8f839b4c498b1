import init, { Demo } from "./pkg/airway_wasm.js";

const $ = (id) => document.getElementById(id);
const SCALE = { mip: 4, slice: 12 };

let demo = null;

function draw(canvas, frame, scale) {
  canvas.width = frame.width;
  canvas.height = frame.height;
  canvas.style.width = `${frame.width * scale}px`;
  canvas.style.height = `${frame.height * scale}px`;
  const data = new Uint8ClampedArray(frame.pixels());
  canvas.getContext("2d").putImageData(new ImageData(data, frame.width, frame.height), 0, 0);
  frame.free();
}

function status(text) {
  $("status").textContent = text;
}

// let the status line repaint before a blocking call
const later = (f) => new Promise((resolve) => setTimeout(() => resolve(f()), 20));

function showSlice() {
  if (!demo) return;
  const depth = Number($("depth").value);
  $("depthmm").textContent = `${depth.toFixed(1)} mm`;
  try {
    draw($("slice"), demo.voiSlice($("kind").value, depth), SCALE.slice);
  } catch (e) {
    status(String(e));
  }
}

async function build() {
  status("generating…");
  await later(() => {
    demo?.free();
    demo = null;
    try {
      demo = new Demo(Number($("gen").value), Number($("angle").value), Number($("noise").value), BigInt($("seed").value));
    } catch (e) {
      status(String(e));
      return;
    }
    draw($("mip"), demo.projection(), SCALE.mip);
    $("report").textContent = "";
    const max = Math.max(0, demo.rootLength() - 10);
    $("depth").max = String(max);
    $("depth").value = String(Math.min(Number($("depth").value), max));
    showSlice();
    status("ready");
  });
}

async function runTrace() {
  if (!demo) return;
  status("tracing…");
  await later(() => {
    const t0 = performance.now();
    try {
      $("report").textContent = demo.trace();
    } catch (e) {
      status(String(e));
      return;
    }
    draw($("mip"), demo.projection(), SCALE.mip);
    status(`traced in ${((performance.now() - t0) / 1000).toFixed(1)} s`);
  });
}

await init();
$("build").addEventListener("click", build);
$("trace").addEventListener("click", runTrace);
$("kind").addEventListener("change", showSlice);
$("depth").addEventListener("input", showSlice);
build();
