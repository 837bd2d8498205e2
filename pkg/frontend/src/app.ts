/** The annotator application: document views, editing, pipeline runs.
 *
 * The server is the single source of truth: every mutation goes through the
 * API and is followed by a full document reload, so what the screen shows
 * is always re-fetchable state, never local bookkeeping.
 */

import { ApiClient, ApiRequestError } from "./api.js";
import { rowFromWire, rowsToWire, parseChips, type AttributeRow } from "./attributes.js";
import { colorForType } from "./colors.js";
import { segmentize, topAnnotation } from "./highlights.js";
import { buildPreviewHtml, previewAvailable, sanitizeHtml } from "./htmlPreview.js";
import { buildOutline } from "./outline.js";
import { clampedRangeToDocumentOffsets, rangeToDocumentOffsets, type OffsetRange } from "./selection.js";
import {
  attributeValue,
  conditionLabel,
  type ComponentInfo,
  type RunReportInfo,
  type RunViolationInfo,
  type WireAnnotation,
  type WireDocument,
} from "./types.js";

type ViewMode = "text" | "preview";

interface RunOutcome {
  report?: RunReportInfo;
  violations?: RunViolationInfo[];
  concurrent?: boolean;
  errorMessage?: string;
  errorDetail?: unknown;
}

interface ViewState {
  collection: string | null;
  docId: string | null;
  doc: WireDocument | null;
  visibleTypes: Set<string>;
  selection: OffsetRange | null;
  view: ViewMode;
  selectedAnnotationId: number | null;
  runOrder: string[];
  runParams: Map<string, Map<string, string>>;
  runOutcome: RunOutcome | null;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

export class App {
  readonly root: HTMLElement;
  readonly api: ApiClient;
  readonly state: ViewState = {
    collection: null,
    docId: null,
    doc: null,
    visibleTypes: new Set(),
    selection: null,
    view: "text",
    selectedAnnotationId: null,
    runOrder: [],
    runParams: new Map(),
    runOutcome: null,
  };
  components: ComponentInfo[] = [];
  /** Types already offered in the legend; newcomers default to visible. */
  private knownTypes = new Set<string>();

  private banner!: HTMLElement;
  private notice!: HTMLElement;
  private collectionSelect!: HTMLSelectElement;
  private documentSelect!: HTMLSelectElement;
  private textView!: HTMLElement;
  private previewView!: HTMLElement;
  private tabText!: HTMLButtonElement;
  private tabPreview!: HTMLButtonElement;
  private typeInput!: HTMLInputElement;
  private createButton!: HTMLButtonElement;
  private selectionHint!: HTMLElement;
  private legendPanel!: HTMLElement;
  private annotationPanel!: HTMLElement;
  private runPanel!: HTMLElement;
  private outlinePanel!: HTMLElement;

  constructor(root: HTMLElement, api: ApiClient) {
    this.root = root;
    this.api = api;
  }

  async init(): Promise<void> {
    this.buildSkeleton();
    try {
      this.components = await this.api.listComponents();
      await this.reloadCollections();
    } catch (error) {
      this.showError(error);
    }
    this.renderRunPanel();
  }

  // ----- skeleton -----------------------------------------------------------

  private buildSkeleton(): void {
    this.root.textContent = "";

    const topbar = el("header", { class: "topbar" });
    topbar.append(el("h1", {}, "annotium"));
    this.collectionSelect = el("select", { class: "collection-select", title: "Collection" });
    this.documentSelect = el("select", { class: "document-select", title: "Document" });
    const reload = el("button", { class: "ghost reload-doc" }, "Reload");
    reload.addEventListener("click", () => void this.reloadDocument());
    this.collectionSelect.addEventListener("change", () => {
      void this.selectCollection(this.collectionSelect.value);
    });
    this.documentSelect.addEventListener("change", () => {
      void this.openDocument(this.state.collection ?? "", this.documentSelect.value);
    });
    topbar.append(this.collectionSelect, this.documentSelect, reload);

    this.banner = el("div", { class: "banner error" });
    this.notice = el("div", { class: "banner notice-bar" });

    const workspace = el("main", { class: "workspace" });
    const docPane = el("section", { class: "doc-pane" });

    const tabs = el("nav", { class: "view-tabs" });
    this.tabText = el("button", { class: "active tab-text" }, "Text");
    this.tabPreview = el("button", { class: "tab-preview" }, "HTML preview");
    this.tabText.addEventListener("click", () => this.switchView("text"));
    this.tabPreview.addEventListener("click", () => this.switchView("preview"));
    tabs.append(this.tabText, this.tabPreview);

    this.textView = el("div", { class: "text-view" });
    this.previewView = el("div", { class: "preview-view", hidden: "hidden" });

    const createBar = el("div", { class: "create-bar" });
    this.typeInput = el("input", { type: "text", placeholder: "annotation type", class: "type-input" });
    this.createButton = el("button", { class: "primary create-annotation", disabled: "disabled" }, "Annotate selection");
    this.selectionHint = el("span", { class: "hint selection-hint" }, "select text to annotate");
    this.createButton.addEventListener("click", () => void this.createAnnotationFromSelection());
    this.typeInput.addEventListener("input", () => this.updateCreateControls());
    createBar.append(this.typeInput, this.createButton, this.selectionHint);

    docPane.append(tabs, this.textView, this.previewView, createBar);

    const side = el("aside", { class: "side-pane" });
    this.legendPanel = el("div", { class: "panel type-legend" });
    this.annotationPanel = el("div", { class: "panel annotation-panel" });
    this.runPanel = el("div", { class: "panel run-panel" });
    this.outlinePanel = el("div", { class: "panel outline" });
    side.append(this.legendPanel, this.annotationPanel, this.runPanel, this.outlinePanel);

    workspace.append(docPane, side);
    this.root.append(topbar, this.banner, this.notice, workspace);

    for (const view of [this.textView, this.previewView]) {
      view.addEventListener("mouseup", () => this.captureSelection());
      view.addEventListener("keyup", () => this.captureSelection());
    }
  }

  // ----- data loading -------------------------------------------------------

  async reloadCollections(): Promise<void> {
    const collections = await this.api.listCollections();
    this.collectionSelect.textContent = "";
    this.collectionSelect.append(el("option", { value: "" }, "collection…"));
    for (const info of collections) {
      this.collectionSelect.append(el("option", { value: info.name }, info.name));
    }
    if (this.state.collection) this.collectionSelect.value = this.state.collection;
  }

  async selectCollection(name: string): Promise<void> {
    if (!name) return;
    this.state.collection = name;
    const collections = await this.api.listCollections();
    const info = collections.find((c) => c.name === name);
    this.documentSelect.textContent = "";
    this.documentSelect.append(el("option", { value: "" }, "document…"));
    for (const docId of info?.documents ?? []) {
      this.documentSelect.append(el("option", { value: docId }, docId));
    }
  }

  async openDocument(collection: string, docId: string): Promise<void> {
    if (!collection || !docId) return;
    try {
      const doc = await this.api.getDocument(collection, docId);
      if (docId !== this.state.docId) {
        this.knownTypes.clear();
        this.state.visibleTypes.clear();
        this.state.selectedAnnotationId = null;
      }
      this.state.collection = collection;
      this.state.docId = docId;
      this.state.doc = doc;
      this.state.selection = null;
      for (const annotation of doc.annotations) {
        if (!this.knownTypes.has(annotation.type)) {
          this.knownTypes.add(annotation.type);
          this.state.visibleTypes.add(annotation.type);
        }
      }
      this.clearError();
      this.renderAll();
    } catch (error) {
      this.showError(error);
    }
  }

  async reloadDocument(): Promise<void> {
    if (this.state.collection && this.state.docId) {
      await this.openDocument(this.state.collection, this.state.docId);
    }
  }

  // ----- rendering ----------------------------------------------------------

  renderAll(): void {
    this.renderDocumentView();
    this.renderLegend();
    this.renderAnnotationPanel();
    this.renderRunPanel();
    this.renderOutline();
  }

  private visibleAnnotations(): WireAnnotation[] {
    const doc = this.state.doc;
    if (!doc) return [];
    return doc.annotations.filter((a) => this.state.visibleTypes.has(a.type));
  }

  renderDocumentView(): void {
    const doc = this.state.doc;
    this.textView.textContent = "";
    if (!doc) {
      this.textView.append(el("p", { class: "hint" }, "open a document to begin"));
      return;
    }
    const segments = segmentize(doc.text.length, this.visibleAnnotations());
    for (const segment of segments) {
      const span = el("span", {
        class: "seg",
        "data-start": String(segment.start),
        "data-end": String(segment.end),
      });
      span.textContent = doc.text.slice(segment.start, segment.end);
      if (segment.covering.length > 0) {
        const top = segment.covering[segment.covering.length - 1]!;
        const bottom = segment.covering[0]!;
        span.dataset.layerCount = String(segment.covering.length);
        span.dataset.annotationIds = segment.covering.map((c) => c.annotation.id).join(",");
        span.dataset.topAnnotation = String(top.annotation.id);
        span.style.backgroundColor = colorForType(top.annotation.type);
        if (segment.covering.length > 1) {
          span.style.borderBottom = `3px solid ${colorForType(bottom.annotation.type)}`;
        }
        span.title = segment.covering
          .map((c) => {
            const attrs = c.annotation.attributes
              .map((a) => `${a.name}=${JSON.stringify(a.value)}`)
              .join(" ");
            return `${c.annotation.type}#${c.annotation.id}${attrs ? " " + attrs : ""}`;
          })
          .join("\n");
        span.addEventListener("click", () => {
          const target = topAnnotation(segment);
          if (target) this.selectAnnotation(target.id);
        });
        span.addEventListener("mouseenter", () => this.hoverAnnotation(top.annotation.id, true));
        span.addEventListener("mouseleave", () => this.hoverAnnotation(top.annotation.id, false));
      }
      this.textView.append(span);
    }
    this.renderPreviewView();
  }

  private hoverAnnotation(annotationId: number, on: boolean): void {
    // shared hover: every segment belonging to the annotation lights up,
    // which is what ties the two halves of a multi-span link together
    const selector = `[data-annotation-ids]`;
    for (const element of Array.from(this.textView.querySelectorAll<HTMLElement>(selector))) {
      const ids = (element.dataset.annotationIds ?? "").split(",").map(Number);
      if (ids.includes(annotationId)) element.classList.toggle("hl", on);
    }
  }

  renderPreviewView(): void {
    const doc = this.state.doc;
    this.previewView.textContent = "";
    if (!doc) return;
    if (!previewAvailable(doc.annotations)) {
      const wrap = el("div", {});
      wrap.append(
        el("p", { class: "hint" }, "No HTML token layer yet. Run the HTML tokenizer to enable the preview."),
      );
      const tokenizeButton = el("button", { class: "primary tokenize-html" }, "Tokenize HTML");
      tokenizeButton.addEventListener("click", () => void this.runComponents(["html_tokenizer"]));
      wrap.append(tokenizeButton);
      this.previewView.append(wrap);
      return;
    }
    const build = buildPreviewHtml(doc.text, doc.annotations);
    const container = el("div", { class: "preview-body" });
    container.innerHTML = sanitizeHtml(build.html);
    this.previewView.append(container);

    if (build.hasLenientMarkup || build.fallbackRegions.length > 0) {
      this.previewView.prepend(
        el(
          "p",
          { class: "notice" },
          "Some regions could not be rendered as HTML and are shown as source text.",
        ),
      );
    }

    // project highlights of visible non-token annotations onto token spans
    const annotations = this.visibleAnnotations().filter((a) => a.type !== "token");
    for (const tokenElement of Array.from(
      container.querySelectorAll<HTMLElement>(".tok:not([data-unselectable='true'])"),
    )) {
      const start = Number(tokenElement.dataset.start);
      const end = Number(tokenElement.dataset.end);
      const covering = annotations
        .filter((a) => a.spans.some(([s, e]) => s < end && e > start))
        .sort((a, b) => spanLength(b) - spanLength(a));
      const top = covering[covering.length - 1];
      if (top) {
        tokenElement.style.backgroundColor = colorForType(top.type);
        tokenElement.title = `${top.type}#${top.id}`;
        tokenElement.addEventListener("click", () => this.selectAnnotation(top.id));
      }
      const token = this.state.doc?.annotations.find(
        (a) => a.id === Number(tokenElement.dataset.tokenId),
      );
      const pos = token ? attributeValue(token, "pos") : undefined;
      if (pos) {
        tokenElement.title = (tokenElement.title ? tokenElement.title + "\n" : "") + `pos=${pos.value}`;
      }
    }
  }

  renderLegend(): void {
    this.legendPanel.textContent = "";
    this.legendPanel.append(el("h2", {}, "Annotation types"));
    const doc = this.state.doc;
    if (!doc) return;
    const types = [...new Set(doc.annotations.map((a) => a.type))].sort();
    for (const annotationType of types) {
      const label = el("label", {});
      const checkbox = el("input", { type: "checkbox", "data-type": annotationType });
      checkbox.checked = this.state.visibleTypes.has(annotationType);
      checkbox.addEventListener("change", () => {
        if (checkbox.checked) this.state.visibleTypes.add(annotationType);
        else this.state.visibleTypes.delete(annotationType);
        this.renderDocumentView();
      });
      const swatch = el("span", { class: "swatch" });
      swatch.style.backgroundColor = colorForType(annotationType);
      label.append(checkbox, swatch, el("span", {}, annotationType));
      this.legendPanel.append(label);
    }
  }

  selectAnnotation(annotationId: number): void {
    this.state.selectedAnnotationId = annotationId;
    this.renderAnnotationPanel();
  }

  renderAnnotationPanel(): void {
    const panel = this.annotationPanel;
    panel.textContent = "";
    panel.append(el("h2", {}, "Annotation"));
    const doc = this.state.doc;
    const annotation = doc?.annotations.find((a) => a.id === this.state.selectedAnnotationId);
    if (!doc || !annotation) {
      panel.append(el("p", { class: "hint" }, "click a highlight to inspect it"));
      return;
    }
    const surface = annotation.spans
      .map(([s, e]) => JSON.stringify(doc.text.slice(s, e)))
      .join(" + ");
    panel.append(
      el(
        "p",
        { class: "annotation-head" },
        `#${annotation.id} ${annotation.type} ${annotation.spans
          .map(([s, e]) => `[${s},${e})`)
          .join(" ")} ${surface}`,
      ),
    );

    const rows: AttributeRow[] = annotation.attributes.map(rowFromWire);
    const table = el("table", { class: "attrs" });
    const head = el("tr", {});
    for (const title of ["name", "kind", "value", ""]) head.append(el("th", {}, title));
    table.append(head);
    const errorBox = el("p", { class: "field-error panel-error" });

    const renderRows = (): void => {
      for (const tr of Array.from(table.querySelectorAll("tr.attr-row"))) tr.remove();
      rows.forEach((row, index) => {
        const tr = el("tr", { class: "attr-row" });

        const nameCell = el("td", {});
        const nameInput = el("input", { type: "text", value: row.name, "data-field": "name" });
        nameInput.addEventListener("input", () => {
          row.name = nameInput.value;
        });
        nameCell.append(nameInput);

        const kindCell = el("td", {});
        const kindSelect = el("select", {});
        for (const kind of ["STRING", "STRING_SET", "ANNOTATION_ID", "ANNOTATION_ID_SET"]) {
          const option = el("option", { value: kind }, kind);
          if (kind === row.kind) option.setAttribute("selected", "selected");
          kindSelect.append(option);
        }
        kindSelect.addEventListener("change", () => {
          row.kind = kindSelect.value as AttributeRow["kind"];
          renderRows();
        });
        kindCell.append(kindSelect);

        const valueCell = el("td", {});
        if (row.kind === "STRING_SET" || row.kind === "ANNOTATION_ID_SET") {
          const chips = el("span", { class: "chips" });
          row.chips.forEach((chip, chipIndex) => {
            const chipEl = el("span", { class: "chip", title: "click to remove" }, chip);
            chipEl.addEventListener("click", () => {
              row.chips.splice(chipIndex, 1);
              renderRows();
            });
            chips.append(chipEl);
          });
          const chipInput = el("input", {
            type: "text",
            placeholder: "add…",
            class: "chip-input",
          });
          chipInput.addEventListener("keydown", (event) => {
            if ((event as KeyboardEvent).key === "Enter") {
              row.chips.push(...parseChips(chipInput.value));
              chipInput.value = "";
              renderRows();
            }
          });
          valueCell.append(chips, chipInput);
        } else {
          const valueInput = el("input", { type: "text", value: row.text, "data-field": "value" });
          valueInput.addEventListener("input", () => {
            row.text = valueInput.value;
          });
          valueCell.append(valueInput);
        }

        const removeCell = el("td", {});
        const removeButton = el("button", { class: "ghost remove-attr" }, "✕");
        removeButton.addEventListener("click", () => {
          rows.splice(index, 1);
          renderRows();
        });
        removeCell.append(removeButton);

        tr.append(nameCell, kindCell, valueCell, removeCell);
        tr.append(el("td", { class: "row-error field-error", hidden: "hidden" }));
        table.append(tr);
      });
    };
    renderRows();

    const addButton = el("button", { class: "ghost add-attr" }, "Add attribute");
    addButton.addEventListener("click", () => {
      rows.push({ name: "", kind: "STRING", text: "", chips: [] });
      renderRows();
    });

    const saveButton = el("button", { class: "primary save-attrs" }, "Save");
    saveButton.addEventListener("click", async () => {
      errorBox.textContent = "";
      const { attributes, problems } = rowsToWire(rows);
      if (problems.length > 0) {
        errorBox.textContent = problems.map((p) => `row ${p.row + 1}: ${p.message}`).join("; ");
        return;
      }
      try {
        await this.api.replaceAnnotation(
          this.state.collection!,
          this.state.docId!,
          annotation.id,
          { attributes },
        );
        await this.reloadDocument();
        this.selectAnnotation(annotation.id);
      } catch (error) {
        errorBox.textContent = describeError(error);
      }
    });

    const deleteButton = el("button", { class: "ghost delete-annotation" }, "Delete annotation");
    deleteButton.addEventListener("click", async () => {
      try {
        await this.api.deleteAnnotation(this.state.collection!, this.state.docId!, annotation.id);
        this.state.selectedAnnotationId = null;
        await this.reloadDocument();
      } catch (error) {
        errorBox.textContent = describeError(error);
      }
    });

    panel.append(table, addButton, saveButton, deleteButton, errorBox);
  }

  renderRunPanel(): void {
    const panel = this.runPanel;
    panel.textContent = "";
    panel.append(el("h2", {}, "Run components"));

    for (const component of this.components) {
      const row = el("div", { class: "component-row" });
      const position = this.state.runOrder.indexOf(component.name);
      const order = el("span", { class: "order" }, position >= 0 ? String(position + 1) : "");
      const toggle = el(
        "button",
        { class: "ghost component-toggle", "data-component": component.name },
        component.name,
      );
      toggle.addEventListener("click", () => {
        this.toggleComponent(component.name);
      });
      row.append(order, toggle, el("span", { class: "hint" }, component.kind.toLowerCase()));
      panel.append(row);

      if (position >= 0 && component.params.length > 0) {
        const paramsBox = el("div", { class: "params" });
        for (const param of component.params) {
          const label = el("label", {}, `${component.name}.${param.name}${param.required ? " *" : ""} `);
          const input = el("input", {
            type: "text",
            "data-param": `${component.name}.${param.name}`,
            value: this.state.runParams.get(component.name)?.get(param.name) ?? String(param.default ?? ""),
          });
          input.addEventListener("input", () => {
            this.setParam(component.name, param.name, input.value);
          });
          label.append(input);
          paramsBox.append(label);
        }
        panel.append(paramsBox);
      }
    }

    const runButton = el("button", { class: "primary trigger-run" }, "Run");
    runButton.addEventListener("click", () => void this.triggerRun());
    panel.append(runButton);
    const result = el("div", { class: "run-result" });
    panel.append(result);
    this.renderRunOutcome(result);
  }

  private renderRunOutcome(result: HTMLElement): void {
    const outcome = this.state.runOutcome;
    if (!outcome) return;
    if (outcome.report) this.renderRunReport(result, outcome.report);
    if (outcome.violations) this.renderPreconditionPanel(result, outcome.violations);
    if (outcome.concurrent) {
      result.append(
        el("p", { class: "field-error concurrent-run" }, "another run is already working on this document"),
      );
    }
    if (outcome.errorMessage) {
      const box = el("details", { class: "run-error" });
      box.append(el("summary", {}, outcome.errorMessage));
      box.append(el("pre", {}, JSON.stringify(outcome.errorDetail ?? "", null, 2)));
      result.append(box);
    }
  }

  toggleComponent(name: string): void {
    const index = this.state.runOrder.indexOf(name);
    if (index >= 0) this.state.runOrder.splice(index, 1);
    else this.state.runOrder.push(name);
    this.renderRunPanel();
  }

  setParam(component: string, name: string, value: string): void {
    if (!this.state.runParams.has(component)) this.state.runParams.set(component, new Map());
    this.state.runParams.get(component)!.set(name, value);
  }

  private collectParams(): Record<string, Record<string, unknown>> {
    const params: Record<string, Record<string, unknown>> = {};
    for (const [component, values] of this.state.runParams) {
      if (!this.state.runOrder.includes(component)) continue;
      params[component] = Object.fromEntries(
        [...values.entries()].filter(([, v]) => v !== ""),
      );
    }
    return params;
  }

  async triggerRun(): Promise<void> {
    await this.runComponents(this.state.runOrder, this.collectParams());
  }

  async runComponents(
    components: string[],
    params: Record<string, Record<string, unknown>> = {},
  ): Promise<void> {
    const result = this.runPanel.querySelector<HTMLElement>(".run-result") ?? this.runPanel;
    result.textContent = "";
    if (!this.state.collection || !this.state.docId) {
      result.append(el("p", { class: "field-error" }, "open a document first"));
      return;
    }
    if (components.length === 0) {
      result.append(el("p", { class: "field-error" }, "pick at least one component"));
      return;
    }
    try {
      const report = await this.api.run(this.state.collection, this.state.docId, components, params);
      this.state.runOutcome = { report };
      // reload re-renders everything, run outcome included
      await this.reloadDocument();
    } catch (error) {
      if (error instanceof ApiRequestError && error.status === 422) {
        this.state.runOutcome = { violations: error.detail as RunViolationInfo[] };
      } else if (error instanceof ApiRequestError && error.status === 409) {
        this.state.runOutcome = { concurrent: true };
      } else {
        this.state.runOutcome = {
          errorMessage: describeError(error),
          errorDetail: (error as ApiRequestError)?.detail,
        };
      }
      this.renderRunPanel();
    }
  }

  private renderRunReport(result: HTMLElement, report: RunReportInfo): void {
    const table = el("table", { class: "report-table" });
    const head = el("tr", {});
    head.append(el("th", {}, "component"), el("th", {}, "ms"));
    table.append(head);
    for (const docReport of report.documents) {
      for (const timing of docReport.components) {
        const tr = el("tr", {});
        tr.append(el("td", {}, timing.name), el("td", {}, timing.millis.toFixed(1)));
        table.append(tr);
      }
    }
    const added = Object.entries(report.totals.annotations_added)
      .map(([t, n]) => `${t}: ${n}`)
      .join(", ");
    result.append(
      el("p", { class: "run-summary" }, `ok=${report.totals.ok} failed=${report.totals.failed}; added ${added || "nothing"}`),
      table,
    );
  }

  private renderPreconditionPanel(result: HTMLElement, violations: RunViolationInfo[]): void {
    const panel = el("div", { class: "panel precondition-panel" });
    panel.append(el("h2", {}, "Missing preconditions"));
    for (const violation of violations ?? []) {
      panel.append(
        el(
          "p",
          { class: "violation", "data-component": violation.component },
          `${violation.component}: missing ${violation.condition}`,
        ),
      );
      const toggle = this.runPanel.querySelector<HTMLElement>(
        `.component-toggle[data-component="${violation.component}"]`,
      );
      toggle?.classList.add("violating");
    }
    result.append(panel);
  }

  renderOutline(): void {
    this.outlinePanel.textContent = "";
    this.outlinePanel.append(el("h2", {}, "Sentences"));
    const doc = this.state.doc;
    if (!doc) return;
    const outline = buildOutline(doc);
    if (outline.length === 0) {
      this.outlinePanel.append(el("p", { class: "hint" }, "no sentence annotations yet"));
      return;
    }
    const list = el("ul", {});
    for (const entry of outline) {
      const item = el("li", { class: "sentence" });
      const [start, end] = entry.sentence.spans[0]!;
      item.append(el("span", {}, `#${entry.sentence.id} ${JSON.stringify(doc.text.slice(start, end))}`));
      const tokens = el("ul", {});
      for (const token of entry.tokens) {
        const [tokenStart, tokenEnd] = token.spans[0]!;
        const pos = attributeValue(token, "pos");
        tokens.append(
          el(
            "li",
            { class: "outline-token" },
            `${token.id}: ${doc.text.slice(tokenStart, tokenEnd)}${pos ? ` (${pos.value})` : ""}`,
          ),
        );
      }
      item.append(tokens);
      list.append(item);
    }
    this.outlinePanel.append(list);
  }

  // ----- selection & creation ----------------------------------------------

  switchView(view: ViewMode): void {
    this.state.view = view;
    this.tabText.classList.toggle("active", view === "text");
    this.tabPreview.classList.toggle("active", view === "preview");
    if (view === "text") {
      this.textView.removeAttribute("hidden");
      this.previewView.setAttribute("hidden", "hidden");
    } else {
      this.previewView.removeAttribute("hidden");
      this.textView.setAttribute("hidden", "hidden");
    }
    this.state.selection = null;
    this.updateCreateControls();
  }

  captureSelection(): void {
    const selection = window.getSelection();
    if (!selection || selection.rangeCount === 0) return;
    this.applySelectionRange(selection.getRangeAt(0));
  }

  /** Resolve a DOM range to document offsets per the active view's rules. */
  applySelectionRange(range: Range): void {
    const host = this.state.view === "text" ? this.textView : this.previewView;
    const offsets =
      this.state.view === "text"
        ? rangeToDocumentOffsets(host, range)
        : clampedRangeToDocumentOffsets(host, range);
    this.state.selection = offsets && offsets.start !== offsets.end ? offsets : null;
    this.updateCreateControls();
  }

  private updateCreateControls(): void {
    const selection = this.state.selection;
    if (selection) {
      this.selectionHint.textContent = `selection [${selection.start},${selection.end})`;
      this.createButton.disabled = this.typeInput.value.trim() === "";
    } else {
      this.selectionHint.textContent = "select text to annotate";
      this.createButton.disabled = true;
    }
  }

  async createAnnotationFromSelection(): Promise<void> {
    const selection = this.state.selection;
    const annotationType = this.typeInput.value.trim();
    if (!selection || !annotationType || !this.state.collection || !this.state.docId) return;
    try {
      await this.api.createAnnotation(this.state.collection, this.state.docId, {
        type: annotationType,
        spans: [[selection.start, selection.end]],
      });
      this.state.visibleTypes.add(annotationType);
      this.clearError();
      await this.reloadDocument();
    } catch (error) {
      // no phantom annotation is kept: state only changes via reload
      this.showError(error);
    }
  }

  // ----- errors --------------------------------------------------------------

  showError(error: unknown): void {
    this.banner.textContent = describeError(error);
  }

  clearError(): void {
    this.banner.textContent = "";
  }
}

function spanLength(annotation: WireAnnotation): number {
  const [start, end] = annotation.spans[0]!;
  return end - start;
}

function describeError(error: unknown): string {
  if (error instanceof ApiRequestError) {
    const detail =
      typeof error.detail === "string"
        ? `: ${error.detail}`
        : Array.isArray(error.detail)
          ? `: ${(error.detail as unknown[]).join("; ")}`
          : "";
    return `${error.message}${detail}`;
  }
  return error instanceof Error ? error.message : String(error);
}
