import { SandshapeApi } from "./api";
import { KEY_BINDINGS, SessionController } from "./controller";
import { grayToRgba } from "./decode";
import { chartPolyline, contourDrawables, Drawable, proposalDrawables, STRATEGY_COLORS } from "./overlay";
import { ActionDoc, Choice, ImageDoc, Proposal, StateDoc } from "./types";

const apiBase = new URLSearchParams(window.location.search).get("api") ?? "";
const api = new SandshapeApi(apiBase);

function el<T extends HTMLElement>(id: string): T {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
}

function drawImage(canvas: HTMLCanvasElement, doc: ImageDoc) {
    canvas.width = doc.width;
    canvas.height = doc.height;
    const ctx = canvas.getContext("2d")!;
    ctx.putImageData(new ImageData(grayToRgba(doc), doc.width, doc.height), 0, 0);
}

function drawOverlay(canvas: HTMLCanvasElement, doc: ImageDoc, drawables: Drawable[]) {
    canvas.width = doc.width;
    canvas.height = doc.height;
    const ctx = canvas.getContext("2d")!;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    for (const item of drawables) {
        ctx.strokeStyle = item.color;
        ctx.fillStyle = item.color;
        ctx.lineWidth = 1.5;
        if (item.kind === "polyline") {
            ctx.beginPath();
            item.points.forEach(([u, v], i) => (i === 0 ? ctx.moveTo(u, v) : ctx.lineTo(u, v)));
            ctx.stroke();
        } else if (item.kind === "arrow") {
            const [fu, fv] = item.from;
            const [tu, tv] = item.to;
            ctx.beginPath();
            ctx.moveTo(fu, fv);
            ctx.lineTo(tu, tv);
            ctx.stroke();
            const angle = Math.atan2(tv - fv, tu - fu);
            ctx.beginPath();
            ctx.moveTo(tu, tv);
            ctx.lineTo(tu - 6 * Math.cos(angle - 0.4), tv - 6 * Math.sin(angle - 0.4));
            ctx.lineTo(tu - 6 * Math.cos(angle + 0.4), tv - 6 * Math.sin(angle + 0.4));
            ctx.fill();
        } else {
            ctx.beginPath();
            ctx.arc(item.at[0], item.at[1], 2.5, 0, 2 * Math.PI);
            ctx.fill();
        }
    }
}

function drawChart(canvas: HTMLCanvasElement, errors: number[]) {
    const ctx = canvas.getContext("2d")!;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.strokeStyle = "#444";
    ctx.strokeRect(0.5, 0.5, canvas.width - 1, canvas.height - 1);
    const pts = chartPolyline(errors, canvas.width, canvas.height);
    if (pts.length === 0) return;
    ctx.strokeStyle = "#4ea3ff";
    ctx.beginPath();
    pts.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
    ctx.stroke();
}

function describeProposal(name: string, proposal: Proposal): string {
    if ("error" in proposal) return `${name}: ${proposal.error}`;
    if (proposal.type === "push") {
        const [su, sv] = proposal.start;
        const [eu, ev] = proposal.end;
        return `${name}: push (${su.toFixed(0)}, ${sv.toFixed(0)}) -> (${eu.toFixed(0)}, ${ev.toFixed(0)})`;
    }
    return `${name}: tap (${proposal.target[0].toFixed(0)}, ${proposal.target[1].toFixed(0)})`;
}

class ConsoleView {
    private controller: SessionController | null = null;
    private previewVisible = false;

    constructor() {
        el<HTMLButtonElement>("create").addEventListener("click", () => void this.createSession());
        el<HTMLButtonElement>("attach").addEventListener("click", () => {
            const id = el<HTMLInputElement>("attach-id").value.trim();
            if (id) this.attach(id);  // reattaching rebuilds the view from /state
        });
        for (const choice of ["tap", "push-max", "push-avg", "push-ann", "auto"] as Choice[]) {
            el<HTMLButtonElement>(`btn-${choice}`).addEventListener("click", () => void this.choose(choice));
        }
        el<HTMLButtonElement>("btn-terminate").addEventListener("click", () => void this.controller?.terminate());
        el<HTMLButtonElement>("btn-export").addEventListener("click", () => void this.exportLog());
        el<HTMLButtonElement>("btn-preview").addEventListener("click", () => void this.previewSelected());
        el<HTMLButtonElement>("btn-dismiss").addEventListener("click", () => this.dismissPreview());
        document.addEventListener("keydown", (event) => {
            if (event.target instanceof HTMLInputElement || event.target instanceof HTMLSelectElement) return;
            if (event.key in KEY_BINDINGS) {
                event.preventDefault();
                void this.controller?.handleKey(event.key);
            }
        });
        void this.loadScenarios();
    }

    private async loadScenarios() {
        try {
            const { builtin } = await api.listScenarios();
            const select = el<HTMLSelectElement>("scenario");
            select.innerHTML = "";
            for (const name of builtin) {
                const option = document.createElement("option");
                option.value = option.textContent = name;
                select.appendChild(option);
            }
        } catch (err) {
            el("status").textContent = `cannot reach server: ${err}`;
        }
    }

    private async createSession() {
        const scenario = el<HTMLSelectElement>("scenario").value;
        const seedText = el<HTMLInputElement>("seed").value.trim();
        const modelText = el<HTMLInputElement>("model").value.trim();
        const { id } = await api.createSession(scenario, {
            seed: seedText ? Number(seedText) : undefined,
            modelPath: modelText || undefined,
        });
        this.attach(id);
    }

    private attach(id: string) {
        this.controller = new SessionController(api, id);
        this.controller.onChange(() => this.render());
        el("session-id").textContent = id;
        void this.controller.refresh();
    }

    private async choose(choice: Choice) {
        await this.controller?.choose(choice);
    }

    private async previewSelected() {
        const controller = this.controller;
        const state = controller?.state;
        if (!controller || !state) return;
        const name = el<HTMLSelectElement>("preview-strategy").value;
        const proposal = state.proposals[name];
        if (!proposal || "error" in proposal) {
            el("preview-note").textContent = `no ${name} proposal available`;
            return;
        }
        const result = await controller.preview(proposal as ActionDoc);
        drawImage(el<HTMLCanvasElement>("preview-image"), result.image);
        el("preview-note").textContent = `predicted e = ${result.e.toFixed(4)} (k stays ${result.k})`;
        el("preview-pane").style.display = "block";
        this.previewVisible = true;
    }

    private dismissPreview() {
        el("preview-pane").style.display = "none";
        this.previewVisible = false;
    }

    private async exportLog() {
        const controller = this.controller;
        if (!controller) return;
        const text = await controller.exportLog();
        const blob = new Blob([text], { type: "application/json" });
        const link = document.createElement("a");
        link.href = URL.createObjectURL(blob);
        link.download = `session-${controller.sessionId}.jsonl`;
        link.click();
        URL.revokeObjectURL(link.href);
    }

    private render() {
        const state = this.controller?.state;
        if (!state) return;
        drawImage(el<HTMLCanvasElement>("current-image"), state.images.current);
        drawImage(el<HTMLCanvasElement>("desired-image"), state.images.desired);
        const overlays: Drawable[] = [
            ...contourDrawables(state.contours.current, "#4ea3ff"),
            ...proposalDrawables(state.proposals),
        ];
        drawOverlay(el<HTMLCanvasElement>("current-overlay"), state.images.current, overlays);
        drawOverlay(el<HTMLCanvasElement>("desired-overlay"), state.images.desired,
                    contourDrawables(state.contours.desired, "#ff6b6b"));
        drawChart(el<HTMLCanvasElement>("chart"), state.errors);

        el("status").textContent =
            `k = ${state.k}   e = ${state.e.toFixed(4)}` +
            (state.terminated ? `   terminated (${state.reason})` : "");
        el("banner").textContent = this.controller?.banner ?? "";
        const proposals = Object.entries(state.proposals)
            .map(([name, proposal]) => describeProposal(name, proposal));
        el("proposals").textContent = proposals.join("\n");

        const disable = state.terminated;
        for (const choice of ["tap", "push-max", "push-avg", "push-ann", "auto"]) {
            el<HTMLButtonElement>(`btn-${choice}`).disabled = disable;
        }
        el<HTMLButtonElement>("btn-preview").disabled = disable;
    }
}

new ConsoleView();
