// Canvas renderers for the belief histogram and the
// observation/announcement timeline. Pure display code: values are
// drawn exactly as received.

import { BeliefPair } from './api.js'
import { TimelineEntry } from './store.js'

const BAR_COLOR = '#3b82f6'
const BAR_DIM = '#cbd5e1'
const OBS_COLOR = '#94a3b8'
const ANNOUNCE_COLOR = '#16a34a'
const CHANGE_COLOR = '#dc2626'
const AXIS_COLOR = '#475569'

export class BeliefHistogram {
    readonly root: HTMLDivElement
    private canvas: HTMLCanvasElement
    private ctx: CanvasRenderingContext2D

    constructor(width = 640, height = 220) {
        this.root = document.createElement('div')
        this.canvas = document.createElement('canvas')
        this.canvas.width = width
        this.canvas.height = height
        this.root.appendChild(this.canvas)
        const ctx = this.canvas.getContext('2d')
        if (!ctx) throw new Error('canvas 2d context not available')
        this.ctx = ctx
    }

    render(pairs: BeliefPair[], highlight: number | null = null) {
        const ctx = this.ctx
        const { width, height } = this.canvas
        ctx.clearRect(0, 0, width, height)
        if (pairs.length === 0) return
        const pad = 28
        const plotW = width - 2 * pad
        const plotH = height - 2 * pad
        const max = Math.max(...pairs.map((p) => p.probability), 1e-9)
        const barW = plotW / pairs.length
        ctx.font = '10px sans-serif'
        pairs.forEach((pair, i) => {
            const h = (pair.probability / max) * plotH
            const x = pad + i * barW
            ctx.fillStyle = pair.completion === highlight ? BAR_COLOR : BAR_DIM
            ctx.fillRect(x + 1, height - pad - h, barW - 2, h)
        })
        ctx.fillStyle = AXIS_COLOR
        ctx.strokeStyle = AXIS_COLOR
        ctx.beginPath()
        ctx.moveTo(pad, height - pad + 0.5)
        ctx.lineTo(width - pad, height - pad + 0.5)
        ctx.stroke()
        const step = Math.max(1, Math.ceil(pairs.length / 16))
        pairs.forEach((pair, i) => {
            if (i % step !== 0) return
            ctx.fillText(String(pair.completion), pad + i * barW + barW / 2 - 5, height - pad + 14)
        })
    }
}

export class Timeline {
    readonly root: HTMLDivElement
    private canvas: HTMLCanvasElement
    private ctx: CanvasRenderingContext2D

    constructor(width = 640, height = 260) {
        this.root = document.createElement('div')
        this.canvas = document.createElement('canvas')
        this.canvas.width = width
        this.canvas.height = height
        this.root.appendChild(this.canvas)
        const ctx = this.canvas.getContext('2d')
        if (!ctx) throw new Error('canvas 2d context not available')
        this.ctx = ctx
    }

    render(entries: TimelineEntry[], tMin: number, tMax: number) {
        const ctx = this.ctx
        const { width, height } = this.canvas
        ctx.clearRect(0, 0, width, height)
        const pad = 32
        const plotW = width - 2 * pad
        const plotH = height - 2 * pad
        const weeks = Math.max(entries.length, 8)
        const xAt = (t: number) => pad + (t + 0.5) * (plotW / weeks)
        const yAt = (v: number) => pad + (1 - (v - tMin) / Math.max(tMax - tMin, 1)) * plotH

        ctx.strokeStyle = AXIS_COLOR
        ctx.strokeRect(pad, pad, plotW, plotH)
        ctx.font = '10px sans-serif'
        ctx.fillStyle = AXIS_COLOR
        ctx.fillText(String(tMax), 4, yAt(tMax) + 3)
        ctx.fillText(String(tMin), 4, yAt(tMin) + 3)

        // weekly estimates
        ctx.fillStyle = OBS_COLOR
        for (const e of entries) {
            ctx.beginPath()
            ctx.arc(xAt(e.t), yAt(e.observation), 3, 0, 2 * Math.PI)
            ctx.fill()
        }
        // announcements as a step line with change markers
        ctx.strokeStyle = ANNOUNCE_COLOR
        ctx.lineWidth = 2
        ctx.beginPath()
        let started = false
        for (const e of entries) {
            if (e.announcement === null) continue
            const x = xAt(e.t)
            const y = yAt(e.announcement)
            if (!started) {
                ctx.moveTo(x, y)
                started = true
            } else {
                ctx.lineTo(x, y)
            }
        }
        ctx.stroke()
        ctx.lineWidth = 1
        for (const e of entries) {
            if (e.announcement === null) continue
            ctx.fillStyle = e.changed ? CHANGE_COLOR : ANNOUNCE_COLOR
            ctx.beginPath()
            ctx.arc(xAt(e.t), yAt(e.announcement), e.changed ? 5 : 3, 0, 2 * Math.PI)
            ctx.fill()
        }
        for (const e of entries) {
            if (e.completed) {
                ctx.strokeStyle = CHANGE_COLOR
                ctx.setLineDash([4, 3])
                ctx.beginPath()
                ctx.moveTo(xAt(e.t), pad)
                ctx.lineTo(xAt(e.t), pad + plotH)
                ctx.stroke()
                ctx.setLineDash([])
            }
        }
    }
}
